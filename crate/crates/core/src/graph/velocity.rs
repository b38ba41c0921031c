use serde::{Deserialize, Serialize};

/// Velocity along a normalized edge coordinate `x ∈ [0, 1]`.
///
/// Piecewise-linear profiles are continuous by construction: they are given
/// by their node values and interpolated linearly in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum VelocityProfile {
    Constant { c: f64 },
    Pwl { nodes: Vec<[f64; 2]> },
}

impl VelocityProfile {
    pub fn constant(c: f64) -> Self {
        Self::Constant { c }
    }

    pub fn piecewise_linear(nodes: Vec<(f64, f64)>) -> Self {
        Self::Pwl {
            nodes: nodes.into_iter().map(|(x, c)| [x, c]).collect(),
        }
    }

    /// Describes why the profile is not admissible, or `None` if it is.
    pub fn check(&self) -> Option<String> {
        match self {
            Self::Constant { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Some(format!("constant velocity {c} is not finite and positive"));
                }
            }
            Self::Pwl { nodes } => {
                if nodes.len() < 2 {
                    return Some("piecewise-linear profile needs at least two nodes".into());
                }
                if nodes[0][0] != 0.0 || nodes[nodes.len() - 1][0] != 1.0 {
                    return Some("piecewise-linear nodes must start at x = 0 and end at x = 1".into());
                }
                for pair in nodes.windows(2) {
                    if !(pair[1][0] > pair[0][0]) {
                        return Some("piecewise-linear node positions must be strictly increasing".into());
                    }
                }
                if let Some(bad) = nodes.iter().find(|n| !(n[1].is_finite() && n[1] > 0.0) || !n[0].is_finite()) {
                    return Some(format!("piecewise-linear node value {} is not finite and positive", bad[1]));
                }
            }
        }
        None
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Pwl { nodes } => {
                let k = segment_of(nodes, x);
                let [x0, c0] = nodes[k];
                let [x1, c1] = nodes[k + 1];
                let s = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
                c0 + s * (c1 - c0)
            }
        }
    }

    /// Exact derivative on the linear piece containing `x`.
    pub fn slope_at(&self, x: f64) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::Pwl { nodes } => {
                let k = segment_of(nodes, x);
                (nodes[k + 1][1] - nodes[k][1]) / (nodes[k + 1][0] - nodes[k][0])
            }
        }
    }

    /// Exact mean of `1 / c` over `[a, b]`.
    pub fn mean_reciprocal(&self, a: f64, b: f64) -> f64 {
        debug_assert!(b > a);
        match self {
            Self::Constant { c } => 1.0 / c,
            Self::Pwl { nodes } => {
                let mut integral = 0.0;
                for seg in nodes.windows(2) {
                    let [x0, c0] = seg[0];
                    let [x1, c1] = seg[1];
                    let lo = a.max(x0);
                    let hi = b.min(x1);
                    if hi > lo {
                        let at = |x: f64| c0 + (x - x0) / (x1 - x0) * (c1 - c0);
                        integral += (hi - lo) * linear_mean_reciprocal(at(lo), at(hi));
                    }
                }
                integral / (b - a)
            }
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Pwl { nodes } => nodes.iter().map(|n| n[1]).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Pwl { nodes } => nodes.iter().map(|n| n[1]).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Profile multiplied pointwise by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Self::Constant { c } => Self::Constant { c: c * factor },
            Self::Pwl { nodes } => Self::Pwl {
                nodes: nodes.iter().map(|&[x, c]| [x, c * factor]).collect(),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }
}

fn segment_of(nodes: &[[f64; 2]], x: f64) -> usize {
    let last = nodes.len() - 2;
    // first node with position > x, minus one
    let idx = nodes.partition_point(|n| n[0] <= x);
    idx.saturating_sub(1).min(last)
}

/// Mean of `1/c` along a segment where `c` is linear from `c0` to `c1`.
fn linear_mean_reciprocal(c0: f64, c1: f64) -> f64 {
    let delta = (c1 - c0) / c0;
    if delta.abs() < 1e-6 {
        (1.0 - delta / 2.0 + delta * delta / 3.0) / c0
    } else {
        delta.ln_1p() / (c1 - c0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let p = VelocityProfile::piecewise_linear(vec![(0.0, 1.0), (0.5, 2.0), (1.0, 2.0)]);
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(0.25), 1.5);
        assert_eq!(p.eval(0.75), 2.0);
        assert_eq!(p.eval(1.0), 2.0);
        assert_eq!(p.slope_at(0.1), 2.0);
        assert_eq!(p.slope_at(0.6), 0.0);
    }

    #[test]
    fn mean_reciprocal_matches_quadrature() {
        let p = VelocityProfile::piecewise_linear(vec![(0.0, 0.5), (0.3, 2.0), (1.0, 1.0)]);
        for &(a, b) in &[(0.0, 1.0), (0.1, 0.2), (0.25, 0.35), (0.9, 1.0)] {
            let m = 20_000;
            let h = (b - a) / m as f64;
            let mid: f64 = (0..m).map(|i| 1.0 / p.eval(a + (i as f64 + 0.5) * h)).sum::<f64>() * h;
            let exact = p.mean_reciprocal(a, b) * (b - a);
            assert!((mid - exact).abs() < 1e-8, "[{a},{b}]: {mid} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(VelocityProfile::constant(0.0).check().is_some());
        assert!(VelocityProfile::piecewise_linear(vec![(0.0, 1.0)]).check().is_some());
        assert!(VelocityProfile::piecewise_linear(vec![(0.0, 1.0), (0.9, 1.0)]).check().is_some());
        assert!(VelocityProfile::piecewise_linear(vec![(0.0, 1.0), (1.0, -1.0)]).check().is_some());
        assert!(VelocityProfile::piecewise_linear(vec![(0.0, 1.0), (1.0, 3.0)]).check().is_none());
    }

    #[test]
    fn json_shape() {
        let p: VelocityProfile = serde_json::from_str(r#"{"kind":"pwl","nodes":[[0,1],[1,3]]}"#).unwrap();
        assert_eq!(p, VelocityProfile::piecewise_linear(vec![(0.0, 1.0), (1.0, 3.0)]));
        let c: VelocityProfile = serde_json::from_str(r#"{"kind":"constant","c":2.5}"#).unwrap();
        assert_eq!(c, VelocityProfile::constant(2.5));
        assert!(serde_json::from_str::<VelocityProfile>(r#"{"kind":"constant","c":1,"x":2}"#).is_err());
    }
}
