use serde::{Deserialize, Serialize};

use super::params::KnnParams;
use super::Encoded;

/// Brute-force k-nearest-neighbour vote. Distance ties keep the earlier
/// training row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Knn {
    k: usize,
    p: f64,
    width: usize,
    /// Row-major training matrix.
    points: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Knn {
    pub fn fit(data: &Encoded<'_>, params: &KnnParams) -> Self {
        let width = data.x.first().map_or(0, Vec::len);
        Self {
            k: params.k.min(data.x.len()),
            p: params.p,
            width,
            points: data.x.iter().flatten().copied().collect(),
            labels: data.y.clone(),
            n_classes: data.n_classes,
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.p == 2.0 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
        } else {
            a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(self.p)).sum()
        }
    }

    /// Indices of the k nearest training rows, nearest first.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, point) in self.points.chunks_exact(self.width).enumerate() {
            let d = self.distance(row, point);
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(self.k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    pub fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_classes);
        out.iter_mut().for_each(|o| *o = 0.0);
        let nn = self.neighbours(row);
        for &i in &nn {
            out[self.labels[i]] += 1.0;
        }
        let k = nn.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_fractions() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).chain([vec![100.0]]).collect();
        let data = Encoded {
            x: &x,
            y: vec![1, 1, 1, 0, 0, 0],
            n_classes: 2,
        };
        let knn = Knn::fit(&data, &KnnParams::default());
        let mut out = [0.0; 2];
        knn.proba_into(&[2.0], &mut out);
        assert_eq!(out, [0.4, 0.6]);
    }

    #[test]
    fn equal_distances_keep_earlier_rows() {
        let x = vec![vec![1.0], vec![-1.0], vec![1.0]];
        let data = Encoded {
            x: &x,
            y: vec![0, 1, 1],
            n_classes: 2,
        };
        let knn = Knn::fit(&data, &KnnParams { k: 2, p: 2.0 });
        assert_eq!(knn.neighbours(&[0.0]), vec![0, 1]);
    }
}
