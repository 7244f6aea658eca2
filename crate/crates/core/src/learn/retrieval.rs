//! Leave-one-out retrieval with Euclidean ranking, precision at rank and
//! average precision.

use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::{GalaxyClass, Grouping};
use crate::error::{Error, Result};
use crate::learn::metrics::mean_std;

/// Gallery ids ordered by distance to the query, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query: usize,
    pub neighbors: Vec<usize>,
    pub distances: Vec<f64>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Rank every gallery item except `query` by L2 distance to it; equal
/// distances keep ascending id order.
pub fn euclidean_rank(query: usize, gallery: &[Vec<f64>]) -> Result<RankedList> {
    let q = gallery.get(query).ok_or(Error::RankOutOfRange { k: query, len: gallery.len() })?;
    let mut scored = Vec::with_capacity(gallery.len().saturating_sub(1));
    for (id, g) in gallery.iter().enumerate() {
        if g.len() != q.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), got: g.len() });
        }
        if id != query {
            scored.push((sq_dist(q, g), id));
        }
    }
    // stable sort on distance alone preserves id order among ties
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(RankedList {
        query,
        distances: scored.iter().map(|s| s.0.sqrt()).collect(),
        neighbors: scored.into_iter().map(|s| s.1).collect(),
    })
}

/// Fraction of the first `k` neighbors sharing the query's label.
pub fn precision_at_k<L: PartialEq>(rl: &RankedList, labels: &[L], k: usize) -> Result<f64> {
    if k == 0 || k > rl.len() {
        return Err(Error::RankOutOfRange { k, len: rl.len() });
    }
    let target = &labels[rl.query];
    let hits = rl.neighbors[..k].iter().filter(|&&id| labels[id] == *target).count();
    Ok(hits as f64 / k as f64)
}

/// `1 / (N - 1) * sum_k P_k rel(k)` over the full list, `N` counting the query's class.
pub fn average_precision<L: PartialEq>(rl: &RankedList, labels: &[L], n_class_examples: usize) -> Result<f64> {
    if n_class_examples < 2 {
        return Err(Error::DegenerateClass);
    }
    let target = &labels[rl.query];
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (rank, &id) in rl.neighbors.iter().enumerate() {
        if labels[id] == *target {
            hits += 1;
            acc += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(acc / (n_class_examples - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore {
    pub group: String,
    pub n_items: usize,
    /// Rank at which precision was read for this group.
    pub rank: usize,
    pub precision: f64,
    pub mean_average_precision: f64,
}

/// Leave-one-out retrieval scores; precisions and APs are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub grouping: usize,
    /// Common rank for every query, when the grouping uses one.
    pub fixed_rank: Option<usize>,
    pub n_queries: usize,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub map_mean: f64,
    pub map_std: f64,
    pub groups: Vec<GroupScore>,
}

/// Leave-one-out evaluation of every item against the others of the grouping.
///
/// With 11 or 3 groups precision is read at rank `N_c - 1`, the number of
/// other items of the query's group; with 5 groups at the size of the
/// smallest group.
pub fn retrieval_eval(features: &[Vec<f64>], classes: &[GalaxyClass], grouping: Grouping) -> Result<RetrievalReport> {
    if features.len() != classes.len() {
        return Err(Error::DimensionMismatch { expected: classes.len(), got: features.len() });
    }
    let kept: Vec<usize> = (0..classes.len()).filter(|&i| grouping.group(classes[i]).is_some()).collect();
    let gallery: Vec<Vec<f64>> = kept.iter().map(|&i| features[i].clone()).collect();
    let labels: Vec<&str> = kept.iter().map(|&i| grouping.group(classes[i]).expect("kept")).collect();

    let mut names: Vec<&str> = Vec::new();
    for &l in &labels {
        if !names.contains(&l) {
            names.push(l);
        }
    }
    let size = |g: &str| labels.iter().filter(|&&l| l == g).count();
    if names.iter().any(|g| size(g) < 2) {
        return Err(Error::DegenerateClass);
    }
    let fixed_rank = match grouping {
        Grouping::Five => names.iter().map(|g| size(g)).min(),
        _ => None,
    };

    let per_query: Vec<(f64, f64)> = (0..gallery.len())
        .into_par_iter()
        .map(|q| {
            let rl = euclidean_rank(q, &gallery)?;
            let n = size(labels[q]);
            let k = fixed_rank.unwrap_or(n - 1);
            Ok((precision_at_k(&rl, &labels, k)?, average_precision(&rl, &labels, n)?))
        })
        .collect::<Result<_>>()?;

    let (p, ap): (Vec<f64>, Vec<f64>) = per_query.iter().copied().unzip();
    let (precision_mean, precision_std) = mean_std(&p);
    let (map_mean, map_std) = mean_std(&ap);
    let groups = names
        .iter()
        .map(|&g| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == g).collect();
            let avg = |v: &[f64]| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
            GroupScore {
                group: g.to_string(),
                n_items: idx.len(),
                rank: fixed_rank.unwrap_or(idx.len() - 1),
                precision: avg(&p),
                mean_average_precision: avg(&ap),
            }
        })
        .collect();
    Ok(RetrievalReport {
        grouping: grouping.count(),
        fixed_rank,
        n_queries: gallery.len(),
        precision_mean,
        precision_std,
        map_mean,
        map_std,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_examples() {
        let g = vec![vec![0.0], vec![1.0], vec![3.0], vec![2.0]];
        let rl = euclidean_rank(0, &g).unwrap();
        assert_eq!(rl.neighbors, vec![1, 3, 2]);
        assert_eq!(rl.distances, vec![1.0, 2.0, 3.0]);

        let dup = vec![vec![0.5, 1.0], vec![2.0, 2.0], vec![0.5, 1.0]];
        let rl = euclidean_rank(0, &dup).unwrap();
        assert_eq!((rl.neighbors[0], rl.distances[0]), (2, 0.0));

        // ties resolved by id
        let tie = vec![vec![0.0], vec![1.0], vec![-1.0], vec![1.0]];
        assert_eq!(euclidean_rank(0, &tie).unwrap().neighbors, vec![1, 2, 3]);
        assert!(matches!(euclidean_rank(0, &[vec![0.0], vec![1.0, 2.0]]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn precision_examples() {
        let labels = [0, 0, 1, 0, 1];
        let rl = RankedList { query: 0, neighbors: vec![1, 2, 3, 4], distances: vec![1.0, 2.0, 3.0, 4.0] };
        assert_eq!(precision_at_k(&rl, &labels, 4).unwrap(), 0.5);
        assert_eq!(precision_at_k(&rl, &labels, 1).unwrap(), 1.0);
        assert!(matches!(precision_at_k(&rl, &labels, 5), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(precision_at_k(&rl, &labels, 0), Err(Error::RankOutOfRange { .. })));

        // relevant at ranks 1 and 3
        let ap = average_precision(&rl, &labels, 3).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!(matches!(average_precision(&rl, &labels, 1), Err(Error::DegenerateClass)));

        let first = RankedList { query: 0, neighbors: vec![1, 3, 2, 4], distances: vec![0.0; 4] };
        assert_eq!(average_precision(&first, &labels, 3).unwrap(), 1.0);
        let last = RankedList { query: 0, neighbors: vec![2, 4, 1, 3], distances: vec![0.0; 4] };
        assert!(average_precision(&last, &labels, 3).unwrap() < ap);
    }

    #[test]
    fn isolated_clusters_are_perfect() {
        use GalaxyClass::*;
        let classes: Vec<GalaxyClass> = GalaxyClass::ALL.iter().flat_map(|&c| std::iter::repeat_n(c, 12)).collect();
        let features: Vec<Vec<f64>> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                // clusters far apart, classes apart within their cluster
                let cluster = ["E", "S0", "S", "SB", "I"].iter().position(|&g| g == c.cluster5()).unwrap();
                vec![1000.0 * cluster as f64 + 10.0 * c.index() as f64 + 0.01 * (i % 12) as f64, 0.0]
            })
            .collect();
        for (g, k) in [(Grouping::Eleven, None), (Grouping::Five, Some(12)), (Grouping::Three, None)] {
            let r = retrieval_eval(&features, &classes, g).unwrap();
            assert_eq!(r.fixed_rank, k);
            if g != Grouping::Five {
                assert_eq!((r.precision_mean, r.map_mean), (1.0, 1.0), "{g:?}");
            }
        }
        let r3 = retrieval_eval(&features, &classes, Grouping::Three).unwrap();
        assert_eq!(r3.n_queries, 108);
        assert!(r3.groups.iter().all(|g| g.group != S0.cluster5() && g.group != I.cluster5()));
        // grouping 5 reads rank 12, so the 12-item S0 and I groups top out at 11/12
        let r5 = retrieval_eval(&features, &classes, Grouping::Five).unwrap();
        for g in &r5.groups {
            let expected = if g.n_items == 12 { 11.0 / 12.0 } else { 1.0 };
            assert!((g.precision - expected).abs() < 1e-15, "{}", g.group);
            assert_eq!(g.mean_average_precision, 1.0);
        }
    }
}
