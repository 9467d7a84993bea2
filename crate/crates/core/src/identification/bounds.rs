use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{LinkClass, LinkId, Network, Topology};

/// Interval knowledge about the parameters: saturation rates and turn
/// ratios per movement, demand per entry link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub saturation_lower: Vec<f64>,
    pub saturation_upper: Vec<f64>,
    pub turn_lower: Vec<f64>,
    pub turn_upper: Vec<f64>,
    pub demand_lower: Vec<f64>,
    pub demand_upper: Vec<f64>,
}

/// Which interval condition a set of bounds breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundsViolation {
    Saturation {
        from: LinkId,
        to: LinkId,
        lower: f64,
        upper: f64,
    },
    TurnRatio {
        from: LinkId,
        to: LinkId,
        lower: f64,
        upper: f64,
    },
    Demand {
        link: LinkId,
        lower: f64,
        upper: f64,
    },
    /// `R̄ λ̄ ≥ C̲` on an entry movement.
    EntryCapacity {
        from: LinkId,
        to: LinkId,
        inflow: f64,
        capacity: f64,
    },
}

impl std::fmt::Display for BoundsViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Saturation { from, to, lower, upper } => {
                write!(f, "saturation bounds of ({from},{to}) are [{lower}, {upper}]; need 0 < lower <= upper")
            }
            Self::TurnRatio { from, to, lower, upper } => {
                write!(f, "turn-ratio bounds of ({from},{to}) are [{lower}, {upper}]; need 0 < lower <= upper")
            }
            Self::Demand { link, lower, upper } => {
                write!(f, "demand bounds of link {link} are [{lower}, {upper}]; need 0 <= lower <= upper")
            }
            Self::EntryCapacity { from, to, inflow, capacity } => write!(
                f,
                "entry movement ({from},{to}): upper inflow {inflow} is not below lower saturation {capacity}"
            ),
        }
    }
}

impl ParameterBounds {
    /// Bounds that pin every parameter to the network's true value.
    pub fn collapsed(net: &Network, demand: &[f64]) -> Self {
        Self {
            saturation_lower: net.saturation().to_vec(),
            saturation_upper: net.saturation().to_vec(),
            turn_lower: net.turn_ratio().to_vec(),
            turn_upper: net.turn_ratio().to_vec(),
            demand_lower: demand.to_vec(),
            demand_upper: demand.to_vec(),
        }
    }

    /// `truth ± margin` for every parameter. Lower bounds on rates are kept
    /// strictly positive (at least a tenth of the true value).
    pub fn from_truth_margin(net: &Network, demand: &[f64], margin: f64) -> Self {
        let lower = |v: &f64| (v - margin).max(0.1 * v);
        Self {
            saturation_lower: net.saturation().iter().map(lower).collect(),
            saturation_upper: net.saturation().iter().map(|v| v + margin).collect(),
            turn_lower: net.turn_ratio().iter().map(lower).collect(),
            turn_upper: net.turn_ratio().iter().map(|v| v + margin).collect(),
            demand_lower: demand.iter().map(|v| (v - margin).max(0.0)).collect(),
            demand_upper: demand.iter().map(|v| v + margin).collect(),
        }
    }

    pub(crate) fn check_dims(&self, topo: &Topology) -> Result<()> {
        let n = topo.num_movements();
        let e = topo.entry_links().len();
        for (what, len, want) in [
            ("lower saturation bounds", self.saturation_lower.len(), n),
            ("upper saturation bounds", self.saturation_upper.len(), n),
            ("lower turn-ratio bounds", self.turn_lower.len(), n),
            ("upper turn-ratio bounds", self.turn_upper.len(), n),
            ("lower demand bounds", self.demand_lower.len(), e),
            ("upper demand bounds", self.demand_upper.len(), e),
        ] {
            if len != want {
                return Err(Error::dim(what, want, len));
            }
        }
        Ok(())
    }

    /// Checks the interval conditions the identification procedure relies on.
    pub fn check(&self, topo: &Topology) -> Result<Vec<BoundsViolation>> {
        self.check_dims(topo)?;
        let mut out = Vec::new();
        for mv in topo.movements() {
            let m = mv.index;
            let (lo, hi) = (self.saturation_lower[m], self.saturation_upper[m]);
            if !(lo > 0.0 && lo <= hi) {
                out.push(BoundsViolation::Saturation { from: mv.from, to: mv.to, lower: lo, upper: hi });
            }
            let (lo, hi) = (self.turn_lower[m], self.turn_upper[m]);
            if !(lo > 0.0 && lo <= hi) {
                out.push(BoundsViolation::TurnRatio { from: mv.from, to: mv.to, lower: lo, upper: hi });
            }
        }
        for (e, &link) in topo.entry_links().iter().enumerate() {
            let (lo, hi) = (self.demand_lower[e], self.demand_upper[e]);
            if !(lo >= 0.0 && lo <= hi) {
                out.push(BoundsViolation::Demand { link, lower: lo, upper: hi });
            }
            for &m in topo.movements_out_of(link) {
                let inflow = self.turn_upper[m] * hi;
                let capacity = self.saturation_lower[m];
                if !(inflow < capacity) {
                    let mv = topo.movements()[m];
                    out.push(BoundsViolation::EntryCapacity { from: mv.from, to: mv.to, inflow, capacity });
                }
            }
        }
        Ok(out)
    }

    /// True when the network's parameters and `demand` lie inside the bounds.
    pub fn contains(&self, net: &Network, demand: &[f64]) -> bool {
        let inside = |lo: &[f64], v: &[f64], hi: &[f64]| lo.iter().zip(v).zip(hi).all(|((l, v), h)| l <= v && v <= h);
        self.check_dims(net.topology()).is_ok()
            && inside(&self.saturation_lower, net.saturation(), &self.saturation_upper)
            && inside(&self.turn_lower, net.turn_ratio(), &self.turn_upper)
            && inside(&self.demand_lower, demand, &self.demand_upper)
    }

    pub fn saturation_known(&self, m: usize) -> bool {
        self.saturation_lower[m] == self.saturation_upper[m]
    }

    pub fn turn_known(&self, m: usize) -> bool {
        self.turn_lower[m] == self.turn_upper[m]
    }

    /// True once every saturation rate and every internal-origin turn ratio
    /// is pinned.
    pub fn is_identified(&self, topo: &Topology) -> bool {
        (0..topo.num_movements())
            .all(|m| self.saturation_known(m) && (topo.from_class(m) != LinkClass::Internal || self.turn_known(m)))
    }

    pub(crate) fn pin_saturation(&mut self, m: usize, value: f64) {
        self.saturation_lower[m] = value;
        self.saturation_upper[m] = value;
    }

    pub(crate) fn pin_turn(&mut self, m: usize, value: f64) {
        self.turn_lower[m] = value;
        self.turn_upper[m] = value;
    }

    /// True when every interval of `self` lies inside the matching one of `outer`.
    pub fn within(&self, outer: &ParameterBounds) -> bool {
        let nested = |lo: &[f64], hi: &[f64], olo: &[f64], ohi: &[f64]| {
            lo.iter().zip(hi).zip(olo.iter().zip(ohi)).all(|((l, h), (ol, oh))| ol <= l && h <= oh)
        };
        nested(&self.saturation_lower, &self.saturation_upper, &outer.saturation_lower, &outer.saturation_upper)
            && nested(&self.turn_lower, &self.turn_upper, &outer.turn_lower, &outer.turn_upper)
            && nested(&self.demand_lower, &self.demand_upper, &outer.demand_lower, &outer.demand_upper)
    }
}

/// On-disk format for bounds, keyed by link ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub movements: Vec<MovementBounds>,
    pub demand: Vec<DemandBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementBounds {
    pub from: LinkId,
    pub to: LinkId,
    pub c_lower: f64,
    pub c_upper: f64,
    pub r_lower: f64,
    pub r_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandBounds {
    pub link: LinkId,
    pub lower: f64,
    pub upper: f64,
}

impl BoundsFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_bounds(topo: &Topology, b: &ParameterBounds) -> Self {
        Self {
            movements: topo
                .movements()
                .iter()
                .map(|mv| MovementBounds {
                    from: mv.from,
                    to: mv.to,
                    c_lower: b.saturation_lower[mv.index],
                    c_upper: b.saturation_upper[mv.index],
                    r_lower: b.turn_lower[mv.index],
                    r_upper: b.turn_upper[mv.index],
                })
                .collect(),
            demand: topo
                .entry_links()
                .iter()
                .enumerate()
                .map(|(e, &link)| DemandBounds { link, lower: b.demand_lower[e], upper: b.demand_upper[e] })
                .collect(),
        }
    }

    /// Resolves link ids against `topo`. Every movement and entry link must be listed exactly once.
    pub fn to_bounds(&self, topo: &Topology) -> Result<ParameterBounds> {
        let n = topo.num_movements();
        let e = topo.entry_links().len();
        let mut b = ParameterBounds {
            saturation_lower: vec![f64::NAN; n],
            saturation_upper: vec![f64::NAN; n],
            turn_lower: vec![f64::NAN; n],
            turn_upper: vec![f64::NAN; n],
            demand_lower: vec![f64::NAN; e],
            demand_upper: vec![f64::NAN; e],
        };
        for mb in &self.movements {
            let m = topo.movement_index(mb.from, mb.to).ok_or_else(|| {
                Error::config("bounds.movements", format!("({},{}) is not a movement", mb.from, mb.to))
            })?;
            if !b.saturation_lower[m].is_nan() {
                return Err(Error::config("bounds.movements", format!("({},{}) listed twice", mb.from, mb.to)));
            }
            b.saturation_lower[m] = mb.c_lower;
            b.saturation_upper[m] = mb.c_upper;
            b.turn_lower[m] = mb.r_lower;
            b.turn_upper[m] = mb.r_upper;
        }
        for db in &self.demand {
            let pos = topo
                .entry_links()
                .iter()
                .position(|&l| l == db.link)
                .ok_or_else(|| Error::config("bounds.demand", format!("link {} is not an entry link", db.link)))?;
            if !b.demand_lower[pos].is_nan() {
                return Err(Error::config("bounds.demand", format!("link {} listed twice", db.link)));
            }
            b.demand_lower[pos] = db.lower;
            b.demand_upper[pos] = db.upper;
        }
        if let Some(m) = b.saturation_lower.iter().position(|v| v.is_nan()) {
            let mv = topo.movements()[m];
            return Err(Error::config("bounds.movements", format!("({},{}) is missing", mv.from, mv.to)));
        }
        if let Some(p) = b.demand_lower.iter().position(|v| v.is_nan()) {
            return Err(Error::config("bounds.demand", format!("link {} is missing", topo.entry_links()[p])));
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generators::make_paper_grid;

    #[test]
    fn grid_margin_satisfies_interval_conditions() {
        let net = make_paper_grid();
        let demand = vec![0.93; 8];
        let b = ParameterBounds::from_truth_margin(&net, &demand, 0.1);
        assert!(b.check(&net).unwrap().is_empty());
        assert!(b.contains(&net, &demand));
        assert!(!b.is_identified(&net));
        let m = net.movement_index(1, 17).unwrap();
        assert!((b.saturation_upper[m] - 1.6).abs() < 1e-12);
        assert!((b.saturation_lower[m] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn collapsed_is_identified() {
        let net = make_paper_grid();
        let b = ParameterBounds::collapsed(&net, &[0.93; 8]);
        assert!(b.is_identified(&net));
    }

    #[test]
    fn entry_capacity_violation_reported() {
        let net = make_paper_grid();
        let b = ParameterBounds::from_truth_margin(&net, &[5.0; 8], 0.1);
        let v = b.check(&net).unwrap();
        assert!(v.iter().any(|v| matches!(v, BoundsViolation::EntryCapacity { .. })));
    }

    #[test]
    fn file_round_trip() {
        let net = make_paper_grid();
        let b = ParameterBounds::from_truth_margin(&net, &[0.93; 8], 0.1);
        let text = BoundsFile::from_bounds(&net, &b).to_json().unwrap();
        let back = BoundsFile::from_json(&text).unwrap().to_bounds(&net).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn file_missing_movement_rejected() {
        let net = make_paper_grid();
        let b = ParameterBounds::from_truth_margin(&net, &[0.93; 8], 0.1);
        let mut f = BoundsFile::from_bounds(&net, &b);
        f.movements.pop();
        assert!(matches!(f.to_bounds(&net), Err(Error::Config { .. })));
    }
}
