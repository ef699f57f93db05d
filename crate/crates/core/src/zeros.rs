//! Zero clusters of sampled functions.
//!
//! Samples with `|f| ≤ tol·max|f|` are "small". A cluster is the (possibly
//! empty) run of small samples between two consecutive significant samples.
//! A cluster whose neighbours have opposite signs is a crossing (a simple
//! zero). A same-sign cluster is a touching zero; it is counted as a
//! multiple zero only when the function actually dips through zero by more
//! than a floating-point noise floor, otherwise it is sub-resolution.

/// Relative noise floor below which a dip through zero is ignored.
pub(crate) const NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ZeroCluster {
    /// Last significant sample before the cluster.
    pub left: usize,
    /// First significant sample after the cluster.
    pub right: usize,
    /// Number of small samples strictly between `left` and `right`.
    pub run: usize,
    /// Opposite signs on the two sides.
    pub crossing: bool,
    /// `+1` if the function goes from negative to positive, `-1` for the
    /// reverse, `0` for touching clusters.
    pub direction: i8,
    /// Touching cluster that dips through zero beyond the noise floor.
    pub multiple: bool,
}

impl ZeroCluster {
    pub fn counts(&self) -> bool {
        self.crossing || self.multiple
    }

    /// Indices of the small samples (wrapping on closed sequences).
    pub fn run_indices(&self, n: usize) -> impl Iterator<Item = usize> {
        let left = self.left;
        (1..=self.run).map(move |k| (left + k) % n)
    }

    /// Location in arc length: linear interpolation for a bare crossing,
    /// otherwise the arc-length midpoint of the small run.
    pub fn location(&self, values: &[f64], s: &[f64], period: Option<f64>) -> f64 {
        let n = values.len();
        let unwrap = |i: usize, base: f64| {
            let mut v = s[i];
            if let Some(p) = period {
                while v < base {
                    v += p;
                }
            }
            v
        };
        let sl = s[self.left];
        let pos = if self.run == 0 {
            let sr = unwrap(self.right, sl);
            let (fl, fr) = (values[self.left], values[self.right]);
            if self.crossing {
                sl + (sr - sl) * fl / (fl - fr)
            } else {
                0.5 * (sl + sr)
            }
        } else {
            let a = unwrap((self.left + 1) % n, sl);
            let b = unwrap((self.left + self.run) % n, sl);
            0.5 * (a + b)
        };
        match period {
            Some(p) => pos.rem_euclid(p),
            None => pos,
        }
    }

    /// Sample index nearest to the cluster location.
    pub fn nearest_index(&self, values: &[f64], s: &[f64], period: Option<f64>) -> usize {
        let loc = self.location(values, s, period);
        let n = values.len();
        let mut cands: Vec<usize> = vec![self.left, self.right];
        cands.extend(self.run_indices(n));
        let dist = |i: usize| {
            let d = (s[i] - loc).abs();
            match period {
                Some(p) => d.min(p - d),
                None => d,
            }
        };
        cands
            .into_iter()
            .min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)))
            .unwrap()
    }
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// All zero clusters of `values`. Leading and trailing small runs of an open
/// sequence are ignored. Returns an empty list when every sample is small.
pub(crate) fn clusters(values: &[f64], closed: bool, tol: f64) -> Vec<ZeroCluster> {
    let n = values.len();
    let scale = max_abs(values);
    if n == 0 || scale == 0.0 {
        return Vec::new();
    }
    let thr = tol * scale;
    let floor = NOISE_FLOOR * scale;
    let sig: Vec<usize> = (0..n).filter(|&i| values[i].abs() > thr).collect();
    if sig.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let pairs = if closed { sig.len() } else { sig.len() - 1 };
    for k in 0..pairs {
        let left = sig[k];
        let right = sig[(k + 1) % sig.len()];
        let run = if right > left {
            right - left - 1
        } else {
            right + n - left - 1
        };
        let (fl, fr) = (values[left], values[right]);
        let crossing = fl.signum() != fr.signum();
        let direction = if !crossing {
            0
        } else if fr > 0.0 {
            1
        } else {
            -1
        };
        if !crossing && run == 0 {
            continue;
        }
        let multiple = if crossing {
            false
        } else {
            let sign = fl.signum();
            let dip = (1..=run)
                .map(|j| -sign * values[(left + j) % n])
                .fold(f64::NEG_INFINITY, f64::max);
            dip > floor
        };
        out.push(ZeroCluster {
            left,
            right,
            run,
            crossing,
            direction,
            multiple,
        });
    }
    out
}
