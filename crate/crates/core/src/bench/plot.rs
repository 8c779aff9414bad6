//! Plot scripts for emitted CSV files. The CLI renders nothing itself.

/// Python/matplotlib script drawing MMD against node count and wall time on
/// log-log axes, one series per method (median over seeds).
pub fn plot_script(csv_name: &str, title: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
# Usage: python3 plot.py  (run from the directory holding {csv_name})
import csv
from collections import defaultdict
from statistics import median

import matplotlib.pyplot as plt

rows = defaultdict(lambda: defaultdict(list))
with open("{csv_name}") as f:
    for r in csv.DictReader(f):
        rows[r["method"]][int(r["seed"])].append(
            (int(r["node_count"]), float(r["wall_time_seconds"]), float(r["mmd"]))
        )

fig, (ax_n, ax_t) = plt.subplots(1, 2, figsize=(11, 4.5))
for method, runs in sorted(rows.items()):
    by_nodes = defaultdict(list)
    for seq in runs.values():
        for n, _, mmd in seq:
            by_nodes[n].append(mmd)
    ns = sorted(by_nodes)
    ax_n.loglog(ns, [median(by_nodes[n]) for n in ns], label=method)
    first = min(runs)
    ax_t.loglog([t for _, t, _ in runs[first]], [m for _, _, m in runs[first]], label=method)
ax_n.set_xlabel("number of nodes")
ax_t.set_xlabel("wall time [s]")
for ax in (ax_n, ax_t):
    ax.set_ylabel("MMD")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
fig.suptitle("{title}")
fig.tight_layout()
fig.savefig("{csv_stem}.png", dpi=150)
"#,
        csv_stem = csv_name.trim_end_matches(".csv"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn references_csv() {
        let s = plot_script("rows.csv", "sphere");
        assert!(s.contains("open(\"rows.csv\")"));
        assert!(s.contains("rows.png"));
        assert!(s.contains("loglog"));
    }
}
