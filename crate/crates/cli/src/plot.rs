use std::fmt::Write as _;

use blocked_bandits::harness::CellSummary;

/// Seed-averaged curves as gnuplot data blocks, one block per cell,
/// columns `t`, mean round-wise reward, mean cumulative regret.
pub fn curves(cells: &[CellSummary]) -> String {
    let mut out = String::new();
    for (k, c) in cells.iter().enumerate() {
        if k > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {} {}", c.dataset, c.algorithm);
        for (t, (r, g)) in c
            .mean_roundwise_reward
            .iter()
            .zip(&c.mean_cumulative_regret)
            .enumerate()
        {
            let _ = writeln!(out, "{} {r} {g}", t + 1);
        }
    }
    out
}

/// A gnuplot script drawing cumulative regret and round-wise reward from
/// the output of [`curves`] stored as `data`.
pub fn gnuplot_script(cells: &[CellSummary], data: &str, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script");
    let _ = writeln!(s, "set terminal pngcairo size 1200,480 noenhanced");
    let _ = writeln!(s, "set output '{}.png'", data.trim_end_matches(".dat"));
    let _ = writeln!(s, "set multiplot layout 1,2 title '{title}'");
    let _ = writeln!(s, "set key left top");
    let _ = writeln!(s, "set xlabel 'round'");
    for (col, label) in [(3, "cumulative regret"), (2, "round-wise mean reward")] {
        let _ = writeln!(s, "set ylabel '{label}'");
        let series: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                format!(
                    "'{data}' index {k} using 1:{col} with lines lw 2 title '{}'",
                    c.algorithm
                )
            })
            .collect();
        let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
    }
    let _ = writeln!(s, "unset multiplot");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(alg: &str) -> CellSummary {
        CellSummary {
            dataset: "d3".into(),
            algorithm: alg.into(),
            horizon: 2,
            failed: 0,
            regret: None,
            mean_cumulative_regret: vec![0.5, 1.0],
            mean_roundwise_reward: vec![0.1, 0.2],
        }
    }

    #[test]
    fn one_block_and_one_series_per_cell() {
        let cells = [cell("a"), cell("b")];
        let data = curves(&cells);
        assert_eq!(data.split("\n\n\n").count(), 2);
        assert!(data.contains("2 0.2 1"));
        let script = gnuplot_script(&cells, "curves.dat", "x");
        assert!(script.contains("index 1 using 1:3"));
        assert!(script.contains("index 0 using 1:2"));
        assert_eq!(script.lines().filter(|l| l.starts_with("plot ")).count(), 2);
    }
}
