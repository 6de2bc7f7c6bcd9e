"""Agent-composition ablation: which views earn their keep?

Builds the comparison table across the standard variants (drop the raw-price
view, drop the DC views, vary the DC agent count) on a small budget and
writes the CSV next to this script. With a tiny trainer budget the numbers
are noisy; the point here is the harness and the table schema.
"""

from pathlib import Path

from masaat.experiments import parse_config, run_ablation

config = parse_config({
    "data": {
        "source": "synthetic",
        "synthetic": {
            "assets": 4, "days": 300, "seed": 9,
            "drift": [0.002, 0.0, 0.0, 0.0],
            "volatility": [0.01, 0.01, 0.01, 0.01],
        },
    },
    "model": {
        "window_len": 8, "embed_dim": 8, "encoder_layers": 1,
        "encoder_heads": 2, "dc_thresholds": [0.005, 0.01, 0.02],
        "include_raw_price_agent": True,
    },
    "trainer": {"max_iterations": 5, "episode_len": 10,
                "learning_rate": 0.003, "seed": 4},
    "metrics": {},
})

out = Path(__file__).parent / "ablation_table.csv"
rows = run_ablation(config, out)
print(f"{'variant':>14} {'agents':>6} {'AR%':>9} {'MDD%':>8} {'SR':>7}")
for row in rows:
    sr = "n/a" if row["sharpe"] is None else f"{row['sharpe']:.3f}"
    print(f"{row['variant']:>14} {row['n_agents']:>6} "
          f"{row['ar_pct']:9.3f} {row['mdd_pct']:8.3f} {sr:>7}")
print(f"\nwrote {out}")
