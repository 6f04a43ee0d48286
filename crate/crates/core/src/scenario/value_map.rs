use serde::{Deserialize, Serialize};

use super::fields::{FloodField, ValueFieldInit};
use super::ScenarioError;

/// Piecewise-linear map from flood magnitude (Q/Q2) to an 8-bit value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Breakpoints {
    points: Vec<(f64, f64)>,
}

impl Default for Breakpoints {
    fn default() -> Self {
        Breakpoints { points: vec![(0.0, 0.0), (0.5, 10.0), (1.0, 100.0), (2.0, 200.0), (3.0, 255.0)] }
    }
}

impl TryFrom<Vec<(f64, f64)>> for Breakpoints {
    type Error = ScenarioError;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, ScenarioError> {
        Breakpoints::new(points)
    }
}

impl From<Breakpoints> for Vec<(f64, f64)> {
    fn from(b: Breakpoints) -> Self {
        b.points
    }
}

impl Breakpoints {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, ScenarioError> {
        if points.is_empty() {
            return Err(ScenarioError::BadBreakpoints("table is empty".into()));
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !(0.0..=255.0).contains(&y) {
                return Err(ScenarioError::BadBreakpoints(format!("entry {i} = ({x}, {y}) out of range")));
            }
            if i > 0 {
                let (px, py) = points[i - 1];
                if x <= px {
                    return Err(ScenarioError::BadBreakpoints(format!("flood magnitudes not strictly increasing at entry {i}")));
                }
                if y < py {
                    return Err(ScenarioError::BadBreakpoints(format!("values decrease at entry {i}")));
                }
            }
        }
        Ok(Breakpoints { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Interpolated value before rounding, clamped to the table ends.
    pub fn interpolate(&self, q: f64) -> f64 {
        let p = &self.points;
        if q <= p[0].0 {
            return p[0].1;
        }
        let last = p[p.len() - 1];
        if q >= last.0 {
            return last.1;
        }
        let i = p.partition_point(|&(x, _)| x <= q);
        let (x0, y0) = p[i - 1];
        let (x1, y1) = p[i];
        y0 + (y1 - y0) * (q - x0) / (x1 - x0)
    }

    pub fn value(&self, q: f64) -> u8 {
        self.interpolate(q).round().clamp(0.0, 255.0) as u8
    }
}

pub fn value_init(flood: &FloodField, breakpoints: &Breakpoints) -> ValueFieldInit {
    flood.map(|q| breakpoints.value(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_table_examples() {
        let b = Breakpoints::default();
        assert_eq!(b.value(0.0), 0);
        assert_eq!(b.value(1.5), 150);
        assert_eq!(b.value(10.0), 255);
        assert_eq!(b.value(-1.0), 0);
        assert_eq!(b.value(0.75), 55);
    }

    #[test]
    fn unsorted_rejected() {
        assert!(Breakpoints::new(vec![(1.0, 10.0), (0.5, 20.0)]).is_err());
        assert!(Breakpoints::new(vec![(0.0, 10.0), (1.0, 5.0)]).is_err());
        assert!(Breakpoints::new(vec![(0.0, 300.0)]).is_err());
        assert!(Breakpoints::new(vec![]).is_err());
    }

    #[test]
    fn field_mapping() {
        let mut f = FloodField::filled(vec![0, 0, 1], 2, 2, 900);
        f.values = vec![0.0, 1.5, 2.0, 9.0];
        let v = value_init(&f, &Breakpoints::default());
        assert_eq!(v.values, vec![0, 150, 200, 255]);
        assert_eq!(v.get(crate::types::GpId(2), 1), 255);
    }

    #[test]
    fn serde_validates() {
        let ok: Breakpoints = serde_json::from_str("[[0,0],[1,100]]").unwrap();
        assert_eq!(ok.value(0.5), 50);
        assert!(serde_json::from_str::<Breakpoints>("[[1,0],[0,100]]").is_err());
    }

    proptest! {
        #[test]
        fn monotone(a in -1.0f64..5.0, b in -1.0f64..5.0) {
            let t = Breakpoints::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(t.value(lo) <= t.value(hi));
        }
    }
}
