//! Finite signed measures on [0, 1] represented as weighted atoms.
//!
//! Atoms are kept sorted by position and every sum over a measure runs in
//! ascending-position order, so results are reproducible bit-for-bit.
//! Atoms sharing a position are only merged by [`ParticleMeasure::coalesce`]
//! (and inside the norms), never as a side effect of construction.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions within this distance outside [0, 1] are treated as round-off and clamped.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(position: f64, weight: f64) -> Self {
        Atom { position, weight }
    }
}

/// Distance below which two atoms are merged by adding their weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoalescePolicy {
    tolerance: f64,
}

impl CoalescePolicy {
    pub const DEFAULT_TOLERANCE: f64 = 1e-12;

    pub fn new(tolerance: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&tolerance) {
            return Err(Error::InvalidParameter(format!(
                "coalescing tolerance must lie in [0, 1), got {tolerance}"
            )));
        }
        Ok(CoalescePolicy { tolerance })
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

impl Default for CoalescePolicy {
    fn default() -> Self {
        CoalescePolicy {
            tolerance: Self::DEFAULT_TOLERANCE,
        }
    }
}

/// Clamp a position that is within round-off of [0, 1]; reject anything further out.
pub(crate) fn snap_to_domain(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    if (0.0..=1.0).contains(&x) {
        Some(x)
    } else if (-DOMAIN_TOLERANCE..0.0).contains(&x) {
        Some(0.0)
    } else if x > 1.0 && x <= 1.0 + DOMAIN_TOLERANCE {
        Some(1.0)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct ParticleMeasure {
    atoms: Vec<Atom>,
}

impl TryFrom<Vec<(f64, f64)>> for ParticleMeasure {
    type Error = Error;

    fn try_from(pairs: Vec<(f64, f64)>) -> Result<Self> {
        ParticleMeasure::new(pairs)
    }
}

impl From<ParticleMeasure> for Vec<(f64, f64)> {
    fn from(mu: ParticleMeasure) -> Self {
        mu.atoms.iter().map(|a| (a.position, a.weight)).collect()
    }
}

impl ParticleMeasure {
    /// Build a measure from `(position, weight)` pairs. Positions are sorted
    /// with a stable sort, so ties keep their input order.
    pub fn new<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms = Vec::new();
        for (position, weight) in pairs {
            if !position.is_finite() || !weight.is_finite() {
                return Err(Error::NonFiniteAtom { position, weight });
            }
            let position = snap_to_domain(position).ok_or(Error::PositionOutOfDomain(position))?;
            atoms.push(Atom { position, weight });
        }
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        Ok(ParticleMeasure { atoms })
    }

    pub fn zero() -> Self {
        ParticleMeasure { atoms: Vec::new() }
    }

    pub fn dirac(position: f64, weight: f64) -> Result<Self> {
        Self::new([(position, weight)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.position)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.weight)
    }

    pub fn to_pairs(&self) -> Vec<(f64, f64)> {
        self.atoms.iter().map(|a| (a.position, a.weight)).collect()
    }

    /// `<mu, phi>`: the sum of `w_i * phi(x_i)` in ascending-position order.
    pub fn pair<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        self.atoms
            .iter()
            .fold(0.0, |acc, a| acc + a.weight * phi(a.position))
    }

    /// `mu([0, 1])`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().fold(0.0, |acc, a| acc + a.weight)
    }

    pub fn first_moment(&self) -> f64 {
        self.pair(|x| x)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|a| a.weight >= 0.0)
    }

    pub fn coalesce(&self, policy: CoalescePolicy) -> ParticleMeasure {
        let mut out: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        // chained clusters: each atom is compared with its left neighbour
        let mut last_position = f64::NEG_INFINITY;
        for a in &self.atoms {
            match out.last_mut() {
                Some(head) if a.position - last_position <= policy.tolerance => {
                    head.weight += a.weight;
                }
                _ => out.push(*a),
            }
            last_position = a.position;
        }
        ParticleMeasure { atoms: out }
    }

    /// Coalesced copy with exactly cancelled atoms removed.
    pub(crate) fn reduced(&self, policy: CoalescePolicy) -> ParticleMeasure {
        let mut m = self.coalesce(policy);
        m.atoms.retain(|a| a.weight != 0.0);
        m
    }

    pub fn tv_norm(&self) -> f64 {
        self.tv_norm_with(CoalescePolicy::default())
    }

    pub fn tv_norm_with(&self, policy: CoalescePolicy) -> f64 {
        self.coalesce(policy)
            .atoms
            .iter()
            .fold(0.0, |acc, a| acc + a.weight.abs())
    }

    /// Image measure under `map`: every atom `(x, w)` becomes `(map(x), w)`.
    pub fn push_forward<F: Fn(f64) -> f64>(&self, map: F) -> Result<ParticleMeasure> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let y = map(a.position);
            let y = snap_to_domain(y).ok_or(Error::MapOutOfRange {
                input: a.position,
                output: y,
            })?;
            atoms.push(Atom::new(y, a.weight));
        }
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        Ok(ParticleMeasure { atoms })
    }

    /// Multiply every weight by `factor`.
    pub fn scale(&self, factor: f64) -> ParticleMeasure {
        ParticleMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom::new(a.position, factor * a.weight))
                .collect(),
        }
    }

    /// Replace each weight `w_i` by `w_i * g(x_i)`.
    pub fn reweight<F: Fn(f64) -> f64>(&self, g: F) -> ParticleMeasure {
        ParticleMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom::new(a.position, a.weight * g(a.position)))
                .collect(),
        }
    }

    // --- serialization ---

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["position", "weight"])?;
        for a in &self.atoms {
            w.serialize((a.position, a.weight))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "position" || &headers[1] != "weight" {
            return Err(Error::bad_spec(
                "csv header",
                format!("expected `position,weight`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut pairs = Vec::new();
        for (line, record) in r.deserialize::<(f64, f64)>().enumerate() {
            let pair = record.map_err(|e| Error::bad_spec(format!("csv row {}", line + 2), e.to_string()))?;
            pairs.push(pair);
        }
        ParticleMeasure::new(pairs)
    }

    pub fn to_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `a * mu + b * nu`, with atoms merged in position order (no coalescing).
pub fn linear_combine(a: f64, mu: &ParticleMeasure, b: f64, nu: &ParticleMeasure) -> ParticleMeasure {
    let mut atoms = Vec::with_capacity(mu.len() + nu.len());
    let (mut i, mut j) = (0, 0);
    while i < mu.atoms.len() || j < nu.atoms.len() {
        let take_left = match (mu.atoms.get(i), nu.atoms.get(j)) {
            (Some(l), Some(r)) => l.position <= r.position,
            (Some(_), None) => true,
            _ => false,
        };
        if take_left {
            let at = mu.atoms[i];
            atoms.push(Atom::new(at.position, a * at.weight));
            i += 1;
        } else {
            let at = nu.atoms[j];
            atoms.push(Atom::new(at.position, b * at.weight));
            j += 1;
        }
    }
    ParticleMeasure { atoms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(pairs: &[(f64, f64)]) -> ParticleMeasure {
        ParticleMeasure::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(m(&[(0.5, 1.0)]).pair(|x| x * x), 0.25);
        assert_eq!(ParticleMeasure::zero().pair(|x| x.sin() + 3.0), 0.0);
        assert_eq!(m(&[(0.2, 2.0), (0.7, -1.0)]).pair(|_| 1.0), 1.0);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(m(&[(0.2, 2.0), (0.7, -1.0)]).tv_norm(), 3.0);
        assert_eq!(m(&[(0.4, 1.0), (0.4, -1.0)]).tv_norm(), 0.0);
        let pos = m(&[(0.1, 0.3), (0.5, 1.2), (0.9, 0.25)]);
        assert_eq!(pos.tv_norm(), pos.pair(|_| 1.0));
    }

    #[test]
    fn sorted_on_construction() {
        let mu = m(&[(0.9, 1.0), (0.1, 2.0), (0.5, 3.0)]);
        let xs: Vec<f64> = mu.positions().collect();
        assert_eq!(xs, vec![0.1, 0.5, 0.9]);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert_eq!(
            ParticleMeasure::new([(1.5, 1.0)]).unwrap_err(),
            Error::PositionOutOfDomain(1.5)
        );
        assert!(matches!(
            ParticleMeasure::new([(0.5, f64::NAN)]),
            Err(Error::NonFiniteAtom { .. })
        ));
        // round-off is clamped
        let mu = ParticleMeasure::new([(1.0 + 1e-14, 1.0), (-1e-14, 1.0)]).unwrap();
        assert_eq!(mu.positions().collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn push_forward_examples() {
        let mu = m(&[(0.5, 1.0)]);
        let shifted = mu.push_forward(|x| (x + 0.7).min(1.0)).unwrap();
        assert_eq!(shifted, m(&[(1.0, 1.0)]));
        let mu = m(&[(0.1, 0.5), (0.3, -2.0), (0.8, 1.0)]);
        assert_eq!(mu.push_forward(|x| x).unwrap(), mu);
        assert!(matches!(
            mu.push_forward(|x| x + 0.5),
            Err(Error::MapOutOfRange { .. })
        ));
    }

    #[test]
    fn push_forward_can_merge_atoms() {
        let mu = m(&[(0.1, 1.0), (0.9, -3.0)]);
        let collapsed = mu.push_forward(|_| 0.5).unwrap();
        assert_eq!(collapsed.tv_norm(), 2.0);
        assert!(collapsed.tv_norm() <= mu.tv_norm());
    }

    #[test]
    fn linear_combine_examples() {
        let mu = m(&[(0.1, 0.5), (0.3, -2.0), (0.8, 1.0)]);
        let nu = m(&[(0.2, 1.0), (0.3, 4.0)]);
        assert_eq!(linear_combine(1.0, &mu, -1.0, &mu).tv_norm(), 0.0);
        let only_nu = linear_combine(0.0, &mu, 1.0, &nu).coalesce(CoalescePolicy::default());
        assert_eq!(only_nu.tv_norm(), nu.tv_norm());
        assert_eq!(linear_combine(0.0, &mu, 1.0, &nu).pair(|x| x), nu.pair(|x| x));
        assert_abs_diff_eq!(mu.scale(-2.5).tv_norm(), 2.5 * mu.tv_norm(), epsilon = 1e-15);
        let sum = linear_combine(1.0, &mu, 1.0, &nu);
        let xs: Vec<f64> = sum.positions().collect();
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn coalesce_chains_and_respects_tolerance() {
        let mu = m(&[(0.5, 1.0), (0.5 + 5e-13, 1.0), (0.5 + 1e-12, 1.0), (0.6, 1.0)]);
        let c = mu.coalesce(CoalescePolicy::default());
        assert_eq!(c.len(), 2);
        assert_eq!(c.atoms()[0].weight, 3.0);
        assert!(CoalescePolicy::new(1.0).is_err());
        assert!(CoalescePolicy::new(-0.1).is_err());
        let coarse = mu.coalesce(CoalescePolicy::new(0.2).unwrap());
        assert_eq!(coarse.len(), 1);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mu = m(&[(0.1, 1.0 / 3.0), (0.30000000000000004, -2.0), (1.0, 1e-300)]);
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("position,weight\n"));
        assert_eq!(ParticleMeasure::read_csv(&buf[..]).unwrap(), mu);
        let json = mu.to_json();
        assert!(json.starts_with("[["));
        assert_eq!(ParticleMeasure::from_json(&json).unwrap(), mu);
    }

    #[test]
    fn csv_bad_header_is_reported() {
        let err = ParticleMeasure::read_csv("x,w\n0.1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::BadSpec { .. }));
        let err = ParticleMeasure::read_csv("position,weight\n0.1,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::BadSpec { location, .. } if location == "csv row 2"));
    }
}
