use serde::Serialize;

use crate::error::{Error, Result};
use crate::tabular::{ColumnKind, Dataset};

pub const DEFAULT_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridAxis {
    /// Equal-width bins over the pooled range; `edges.len() = bins + 1`.
    Bins { column: String, edges: Vec<f64> },
    Categories { column: String, labels: Vec<String> },
}

impl GridAxis {
    pub fn len(&self) -> usize {
        match self {
            GridAxis::Bins { edges, .. } => edges.len() - 1,
            GridAxis::Categories { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self) -> &str {
        match self {
            GridAxis::Bins { column, .. } | GridAxis::Categories { column, .. } => column,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            GridAxis::Bins { edges, .. } => edges.windows(2).map(|w| format!("[{:.6},{:.6})", w[0], w[1])).collect(),
            GridAxis::Categories { labels, .. } => labels.clone(),
        }
    }
}

/// Counts of two sources on a shared 1-D or 2-D grid. 2-D counts are row
/// major with the first axis indexing rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramGrid {
    pub axes: Vec<GridAxis>,
    pub real: Vec<usize>,
    pub synthetic: Vec<usize>,
}

impl HistogramGrid {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(GridAxis::len).collect()
    }

    /// Counts of one source as rows of the grid (a single row for 1-D grids).
    pub fn matrix(&self, synthetic: bool) -> Vec<Vec<usize>> {
        let counts = if synthetic { &self.synthetic } else { &self.real };
        let cols = *self.shape().last().expect("grid has an axis");
        counts.chunks(cols).map(<[usize]>::to_vec).collect()
    }

    /// CSV matrix: header of column-axis labels, one line per row-axis bin.
    pub fn to_csv(&self, synthetic: bool) -> String {
        let mut out = String::new();
        let cols = self.axes.last().expect("grid has an axis").labels();
        let rows = if self.axes.len() == 2 { self.axes[0].labels() } else { vec!["count".to_string()] };
        out.push_str(&format!("bin,{}\n", cols.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",")));
        for (label, row) in rows.iter().zip(self.matrix(synthetic)) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            out.push_str(&format!("{},{}\n", csv_field(label), cells.join(",")));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

enum Binner {
    Real { lo: f64, width: f64, bins: usize },
    Category,
}

impl Binner {
    fn index(&self, data: &Dataset, column: usize, row: usize) -> usize {
        match self {
            Binner::Real { lo, width, bins } => {
                let v = data.real_column(column)[row];
                (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
            }
            Binner::Category => data.category_column(column)[row],
        }
    }
}

fn axis_for(real: &Dataset, synthetic: &Dataset, name: &str, bins: usize) -> Result<(usize, usize, GridAxis, Binner)> {
    let a = real.schema().require_index(name)?;
    let b = synthetic.schema().require_index(name)?;
    let (ka, kb) = (&real.schema().column(a).kind, &synthetic.schema().column(b).kind);
    if ka != kb {
        return Err(Error::Schema(format!("column {name} differs between the two sources")));
    }
    match ka {
        ColumnKind::Continuous => {
            if bins < 2 {
                return Err(Error::InvalidArgument(format!("continuous column {name} needs at least 2 bins")));
            }
            let values = real.real_column(a).iter().chain(synthetic.real_column(b));
            let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                return Err(Error::InsufficientData("both sources are empty".into()));
            }
            if hi <= lo {
                lo -= 0.5;
                hi += 0.5;
            }
            let width = (hi - lo) / bins as f64;
            let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
            Ok((
                a,
                b,
                GridAxis::Bins {
                    column: name.to_string(),
                    edges,
                },
                Binner::Real { lo, width, bins },
            ))
        }
        ColumnKind::Discrete { categories } => Ok((
            a,
            b,
            GridAxis::Categories {
                column: name.to_string(),
                labels: categories.clone(),
            },
            Binner::Category,
        )),
    }
}

/// Per-source counts of one column on shared bins (one bin per category for
/// discrete columns).
pub fn marginal_histogram(real: &Dataset, synthetic: &Dataset, column: &str, bins: usize) -> Result<HistogramGrid> {
    let (a, b, axis, binner) = axis_for(real, synthetic, column, bins)?;
    let n = axis.len();
    let count = |data: &Dataset, c: usize| {
        let mut out = vec![0usize; n];
        for r in 0..data.n_rows() {
            out[binner.index(data, c, r)] += 1;
        }
        out
    };
    Ok(HistogramGrid {
        real: count(real, a),
        synthetic: count(synthetic, b),
        axes: vec![axis],
    })
}

/// Per-source counts on the product grid of two columns.
pub fn joint_density(
    real: &Dataset,
    synthetic: &Dataset,
    column_a: &str,
    column_b: &str,
    bins: usize,
) -> Result<HistogramGrid> {
    let (ra, sa, axis_a, bin_a) = axis_for(real, synthetic, column_a, bins)?;
    let (rb, sb, axis_b, bin_b) = axis_for(real, synthetic, column_b, bins)?;
    let (na, nb) = (axis_a.len(), axis_b.len());
    let count = |data: &Dataset, ca: usize, cb: usize| {
        let mut out = vec![0usize; na * nb];
        for r in 0..data.n_rows() {
            out[bin_a.index(data, ca, r) * nb + bin_b.index(data, cb, r)] += 1;
        }
        out
    };
    Ok(HistogramGrid {
        real: count(real, ra, rb),
        synthetic: count(synthetic, sa, sb),
        axes: vec![axis_a, axis_b],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub tv_distance: f64,
    /// `p̂_real − p̂_synthetic` per bin, grid order.
    pub residuals: Vec<f64>,
}

/// Total variation `½ Σ |p − q|` between two count vectors.
pub fn tv_distance(p: &[usize], q: &[usize]) -> Result<f64> {
    Ok(divergence_of(p, q)?.tv_distance)
}

fn divergence_of(p: &[usize], q: &[usize]) -> Result<Divergence> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("{} vs {} bins", p.len(), q.len())));
    }
    let (np, nq) = (p.iter().sum::<usize>(), q.iter().sum::<usize>());
    if np == 0 || nq == 0 {
        return Err(Error::InsufficientData("a histogram source is empty".into()));
    }
    let residuals: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| a as f64 / np as f64 - b as f64 / nq as f64)
        .collect();
    let tv = (residuals.iter().map(|r| r.abs()).sum::<f64>() / 2.0).min(1.0);
    Ok(Divergence {
        tv_distance: tv,
        residuals,
    })
}

pub fn divergence(grid: &HistogramGrid) -> Result<Divergence> {
    divergence_of(&grid.real, &grid.synthetic)
}

/// Number of 4-connected regions of a 2-D grid whose cells hold strictly
/// more than the given quantile of that source's cell counts.
pub fn dense_regions(grid: &HistogramGrid, synthetic: bool, quantile: f64) -> Result<usize> {
    if grid.axes.len() != 2 {
        return Err(Error::InvalidArgument("dense regions need a 2-D grid".into()));
    }
    let (rows, cols) = (grid.axes[0].len(), grid.axes[1].len());
    let counts = if synthetic { &grid.synthetic } else { &grid.real };
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    let pos = ((sorted.len() - 1) as f64 * quantile.clamp(0.0, 1.0)).round() as usize;
    let threshold = sorted[pos];
    let mut seen = vec![false; counts.len()];
    let mut regions = 0;
    for start in 0..counts.len() {
        if seen[start] || counts[start] <= threshold {
            continue;
        }
        regions += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(cell) = stack.pop() {
            let (r, c) = (cell / cols, cell % cols);
            let mut visit = |rr: usize, cc: usize| {
                let k = rr * cols + cc;
                if !seen[k] && counts[k] > threshold {
                    seen[k] = true;
                    stack.push(k);
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < rows {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < cols {
                visit(r, c + 1);
            }
        }
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tabular::{ColumnSpec, DataSchema, Value};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::sync::Arc;

    fn schema() -> Arc<DataSchema> {
        Arc::new(
            DataSchema::new(
                vec![
                    ColumnSpec::continuous("a"),
                    ColumnSpec::continuous("b"),
                    ColumnSpec::discrete("y", ["A", "B"]),
                ],
                "y",
            )
            .unwrap(),
        )
    }

    fn sample(n: usize, seed: u64, f: impl Fn(&mut crate::rng::StreamRng) -> (f64, f64)) -> Dataset {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<Value>> = (0..n)
            .map(|i| {
                let (a, b) = f(&mut r);
                vec![Value::Real(a), Value::Real(b), Value::Category(usize::from(i % 10 >= 7))]
            })
            .collect();
        Dataset::from_rows(schema(), &rows).unwrap()
    }

    fn normal(r: &mut crate::rng::StreamRng) -> f64 {
        r.sample(StandardNormal)
    }

    #[test]
    fn identical_sources() {
        let d = sample(500, 1, |r| (normal(r), normal(r)));
        let g = marginal_histogram(&d, &d, "a", 30).unwrap();
        assert_eq!(g.real, g.synthetic);
        assert_eq!(g.real.iter().sum::<usize>(), 500);
        assert_eq!(divergence(&g).unwrap().tv_distance, 0.0);
        let j = joint_density(&d, &d, "a", "b", 10).unwrap();
        assert_eq!(j.real, j.synthetic);
        assert_eq!(j.shape(), vec![10, 10]);
        if let GridAxis::Bins { edges, .. } = &g.axes[0] {
            assert!(edges.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn category_bins() {
        let d = sample(100, 1, |r| (normal(r), normal(r)));
        let g = marginal_histogram(&d, &d, "y", 30).unwrap();
        assert_eq!(g.real, vec![70, 30]);
        assert_eq!(g.axes[0].labels(), vec!["A", "B"]);
        assert!(g.to_csv(false).contains("count,70,30"));
    }

    #[test]
    fn tv_hand_values() {
        assert!((tv_distance(&[70, 30], &[60, 40]).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(tv_distance(&[5, 0], &[0, 5]).unwrap(), 1.0);
        assert!(tv_distance(&[0, 0], &[1, 1]).is_err());
    }

    #[test]
    fn same_distribution_samples_are_close() {
        let a = sample(10_000, 1, |r| (normal(r), 0.0));
        let b = sample(10_000, 2, |r| (normal(r), 0.0));
        let g = marginal_histogram(&a, &b, "a", 20).unwrap();
        assert!(divergence(&g).unwrap().tv_distance < 0.05);
    }

    #[test]
    fn independent_joint_matches_product_of_marginals() {
        let d = sample(10_000, 3, |r| (normal(r), r.random::<f64>()));
        let g = joint_density(&d, &d, "a", "b", 10).unwrap();
        let m = g.matrix(false);
        let n = 10_000.0;
        let rows: Vec<f64> = m.iter().map(|r| r.iter().sum::<usize>() as f64 / n).collect();
        let cols: Vec<f64> = (0..10).map(|c| m.iter().map(|r| r[c]).sum::<usize>() as f64 / n).collect();
        let tv: f64 = (0..10)
            .flat_map(|i| (0..10).map(move |j| (i, j)))
            .map(|(i, j)| (m[i][j] as f64 / n - rows[i] * cols[j]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.08, "{tv}");
    }

    /// Union–find count of connected above-threshold cells.
    fn regions_oracle(counts: &[usize], rows: usize, cols: usize, threshold: usize) -> usize {
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut parent: Vec<usize> = (0..counts.len()).collect();
        for r in 0..rows {
            for c in 0..cols {
                let k = r * cols + c;
                if counts[k] <= threshold {
                    continue;
                }
                for (rr, cc) in [(r + 1, c), (r, c + 1)] {
                    if rr < rows && cc < cols && counts[rr * cols + cc] > threshold {
                        let (x, y) = (find(&mut parent, k), find(&mut parent, rr * cols + cc));
                        parent[x] = y;
                    }
                }
            }
        }
        let mut roots: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] > threshold).map(|k| find(&mut parent, k)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    #[test]
    fn two_clusters_give_two_dense_regions() {
        let d = sample(10_000, 4, |r| {
            let c = if r.random::<bool>() { -4.0 } else { 4.0 };
            (c + normal(r), c + normal(r))
        });
        let g = joint_density(&d, &d, "a", "b", 12).unwrap();
        let mut sorted = g.real.clone();
        sorted.sort_unstable();
        let threshold = sorted[((sorted.len() - 1) as f64 * 0.5).round() as usize];
        let got = dense_regions(&g, false, 0.5).unwrap();
        assert_eq!(got, regions_oracle(&g.real, 12, 12, threshold));
        assert_eq!(got, 2);
    }

    proptest! {
        #[test]
        fn flood_fill_matches_union_find(cells in prop::collection::vec(0usize..5, 36)) {
            let grid = HistogramGrid {
                axes: vec![
                    GridAxis::Categories { column: "r".into(), labels: (0..6).map(|i| i.to_string()).collect() },
                    GridAxis::Categories { column: "c".into(), labels: (0..6).map(|i| i.to_string()).collect() },
                ],
                real: cells.clone(),
                synthetic: cells.clone(),
            };
            let mut sorted = cells.clone();
            sorted.sort_unstable();
            let threshold = sorted[((sorted.len() - 1) as f64 * 0.5).round() as usize];
            prop_assert_eq!(dense_regions(&grid, false, 0.5).unwrap(), regions_oracle(&cells, 6, 6, threshold));
        }

        #[test]
        fn tv_is_a_symmetric_bounded_distance(p in prop::collection::vec(0usize..20, 5), q in prop::collection::vec(0usize..20, 5)) {
            prop_assume!(p.iter().sum::<usize>() > 0 && q.iter().sum::<usize>() > 0);
            let a = tv_distance(&p, &q).unwrap();
            prop_assert!((a - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        }
    }
}
