//! Planar node/scatterer layout and per-link path angles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carrier wavelength at 2.4 GHz, in meters.
pub const DEFAULT_WAVELENGTH_M: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing from `self` towards `other`, in degrees within [0, 360).
    pub fn bearing_to(&self, other: &Point) -> f64 {
        normalize_deg((other.y - self.y).atan2(other.x - self.x).to_degrees())
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

/// Wraps an angle in degrees into [0, 360).
pub fn normalize_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeId {
    Alice,
    Bob,
    Mallory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    alice: Point,
    bob: Point,
    mallory: Point,
    scatterers: Vec<Point>,
}

impl Topology {
    /// Builds a validated topology. Mallory must sit at least one
    /// `wavelength` away from both legitimate nodes.
    pub fn new(
        alice: Point,
        bob: Point,
        mallory: Point,
        scatterers: Vec<Point>,
        wavelength: f64,
    ) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::Geometry(format!("invalid wavelength {wavelength}")));
        }
        for (name, p) in [("alice", alice), ("bob", bob), ("mallory", mallory)] {
            if !p.is_finite() {
                return Err(Error::Geometry(format!("{name} position is not finite")));
            }
        }
        if alice.distance(&bob) == 0.0 {
            return Err(Error::Geometry("alice and bob are coincident".into()));
        }
        for (name, p) in [("alice", alice), ("bob", bob)] {
            let dist = mallory.distance(&p);
            if dist < wavelength {
                return Err(Error::Geometry(format!(
                    "mallory is {dist:.4} m from {name}, less than one wavelength ({wavelength} m)"
                )));
            }
        }
        for (i, s) in scatterers.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::Geometry(format!("scatterer {i} is not finite")));
            }
            if [alice, bob, mallory].iter().any(|p| p == s) {
                return Err(Error::Geometry(format!(
                    "scatterer {i} coincides with a node position"
                )));
            }
        }
        Ok(Self {
            alice,
            bob,
            mallory,
            scatterers,
        })
    }

    /// The simulation layout: A(5,0), B(15,0), M(10,5√3) with the given scatterers.
    pub fn reference(scatterers: Vec<Point>) -> Result<Self> {
        Self::new(
            Point::new(5.0, 0.0),
            Point::new(15.0, 0.0),
            Point::new(10.0, 5.0 * 3f64.sqrt()),
            scatterers,
            DEFAULT_WAVELENGTH_M,
        )
    }

    pub fn position(&self, node: NodeId) -> Point {
        match node {
            NodeId::Alice => self.alice,
            NodeId::Bob => self.bob,
            NodeId::Mallory => self.mallory,
        }
    }

    pub fn scatterers(&self) -> &[Point] {
        &self.scatterers
    }
}

/// Departure angles of every path of one link, index 0 being line of sight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPathSet {
    pub angles: Vec<f64>,
}

impl LinkPathSet {
    pub fn path_count(&self) -> usize {
        self.angles.len()
    }
}

/// Departure angles at `tx` for the direct path and one single-bounce path per scatterer.
pub fn path_angles(topology: &Topology, tx: NodeId, rx: NodeId) -> Result<LinkPathSet> {
    if tx == rx {
        return Err(Error::Geometry(format!("link endpoints are both {tx:?}")));
    }
    let from = topology.position(tx);
    let to = topology.position(rx);
    if from.distance(&to) == 0.0 {
        return Err(Error::Geometry(format!("{tx:?} and {rx:?} are coincident")));
    }
    let mut angles = Vec::with_capacity(1 + topology.scatterers.len());
    angles.push(from.bearing_to(&to));
    angles.extend(topology.scatterers.iter().map(|s| from.bearing_to(s)));
    Ok(LinkPathSet { angles })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node(scatterers: Vec<Point>) -> Topology {
        Topology::new(
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(5.0, 20.0),
            scatterers,
            DEFAULT_WAVELENGTH_M,
        )
        .unwrap()
    }

    #[test]
    fn axis_aligned_los() {
        let t = two_node(vec![]);
        let p = path_angles(&t, NodeId::Alice, NodeId::Bob).unwrap();
        assert_eq!(p.angles, vec![0.0]);
    }

    #[test]
    fn perpendicular_scatterer() {
        let t = two_node(vec![Point::new(0.0, 5.0)]);
        let p = path_angles(&t, NodeId::Alice, NodeId::Bob).unwrap();
        assert_eq!(p.path_count(), 2);
        assert_eq!(p.angles[0], 0.0);
        assert!((p.angles[1] - 90.0).abs() < 1e-12);
    }

    #[test]
    fn reference_layout_bearing_alice_to_mallory() {
        let t = Topology::reference(vec![]).unwrap();
        let p = path_angles(&t, NodeId::Alice, NodeId::Mallory).unwrap();
        assert!((p.angles[0] - 60.0).abs() < 1e-9);
        // and the reverse direction points back down-left
        let back = path_angles(&t, NodeId::Mallory, NodeId::Alice).unwrap();
        assert!((back.angles[0] - 240.0).abs() < 1e-9);
    }

    #[test]
    fn angles_are_wrapped() {
        let t = two_node(vec![Point::new(3.0, -4.0)]);
        let p = path_angles(&t, NodeId::Bob, NodeId::Alice).unwrap();
        assert!((p.angles[0] - 180.0).abs() < 1e-12);
        assert!(p.angles.iter().all(|a| (0.0..360.0).contains(a)));
        assert!(normalize_deg(-1e-18) < 360.0);
    }

    #[test]
    fn rejects_bad_layouts() {
        let same_link = path_angles(&two_node(vec![]), NodeId::Bob, NodeId::Bob);
        assert!(matches!(same_link, Err(Error::Geometry(_))));
        let close = Topology::new(
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(0.05, 0.0),
            vec![],
            DEFAULT_WAVELENGTH_M,
        );
        assert!(close.is_err());
        let on_node = Topology::new(
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(5.0, 5.0),
            vec![Point::new(10.0, 0.0)],
            DEFAULT_WAVELENGTH_M,
        );
        assert!(on_node.is_err());
        let coincident = Topology::new(
            Point::new(1.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(5.0, 5.0),
            vec![],
            DEFAULT_WAVELENGTH_M,
        );
        assert!(coincident.is_err());
    }
}
