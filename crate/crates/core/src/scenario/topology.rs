//! Matrix placement and radial grid mobility.

use crate::phy::NodePosition;
use crate::scenario::config::Mobility;
use crate::sim::SimTime;
use crate::NodeId;

/// Square grid with `spacing` meters between row and column neighbors.
/// Node `i` sits at column `i % side`, row `i / side`.
pub fn matrix_topology(n_nodes: usize, spacing: f64) -> Vec<NodePosition> {
    let side = (n_nodes as f64).sqrt().round() as usize;
    (0..n_nodes).map(|i| NodePosition::new((i % side) as f64 * spacing, (i / side) as f64 * spacing)).collect()
}

/// Positions over time. Mobile grids scale about their center so that the
/// spacing moves linearly from `d_start` to `d_end` over `duration`, then stays.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityPlan {
    pub initial: Vec<NodePosition>,
    pub center: NodePosition,
    pub d_start: f64,
    pub d_end: f64,
    pub duration: SimTime,
}

impl MobilityPlan {
    pub fn new(n_nodes: usize, spacing: f64, mobility: Mobility, duration: SimTime) -> Self {
        let (d_start, d_end) = mobility.span().unwrap_or((spacing, spacing));
        let initial = matrix_topology(n_nodes, d_start);
        let side = (n_nodes as f64).sqrt().round();
        let half = (side - 1.0) * d_start / 2.0;
        MobilityPlan { initial, center: NodePosition::new(half, half), d_start, d_end, duration }
    }

    pub fn is_static(&self) -> bool {
        self.d_start == self.d_end
    }

    /// Grid spacing at time `t`.
    pub fn spacing_at(&self, t: SimTime) -> f64 {
        if self.is_static() || self.duration == SimTime::ZERO {
            return self.d_end;
        }
        let frac = (t.as_secs_f64() / self.duration.as_secs_f64()).min(1.0);
        self.d_start + (self.d_end - self.d_start) * frac
    }

    pub fn position_at(&self, node: NodeId, t: SimTime) -> NodePosition {
        let p = self.initial[node];
        if self.is_static() {
            return p;
        }
        let k = self.spacing_at(t) / self.d_start;
        NodePosition::new(self.center.x + (p.x - self.center.x) * k, self.center.y + (p.y - self.center.y) * k)
    }

    pub fn positions_at(&self, t: SimTime) -> Vec<NodePosition> {
        (0..self.initial.len()).map(|i| self.position_at(i, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let p = matrix_topology(9, 50.0);
        assert_eq!(p[0], NodePosition::new(0.0, 0.0));
        assert_eq!(p[5], NodePosition::new(100.0, 50.0));
        assert_eq!(p[8], NodePosition::new(100.0, 100.0));
    }

    #[test]
    fn outward_reaches_target_grid() {
        let t_end = SimTime::from_secs(10);
        let plan = MobilityPlan::new(25, 20.0, Mobility::OUTWARD, t_end);
        let target = matrix_topology(25, 150.0);
        // the scaled grid equals the target grid translated so centers coincide
        let shift = 2.0 * 150.0 - 2.0 * 20.0;
        for (i, q) in target.iter().enumerate() {
            let p = plan.position_at(i, t_end);
            assert!((p.x - (q.x - shift)).abs() < 1e-9 && (p.y - (q.y - shift)).abs() < 1e-9);
            assert_eq!(p, plan.position_at(i, SimTime::from_secs(99)));
        }
        // center node never moves
        assert_eq!(plan.position_at(12, SimTime::from_secs(3)), plan.initial[12]);
        assert_eq!(plan.spacing_at(SimTime::from_secs(5)), 85.0);
    }

    #[test]
    fn inward_shrinks() {
        let plan = MobilityPlan::new(4, 150.0, Mobility::INWARD, SimTime::from_secs(2));
        let a = plan.position_at(0, SimTime::from_secs(2));
        let b = plan.position_at(3, SimTime::from_secs(2));
        assert!((a.distance(&b) - 20.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn continuous_in_time() {
        let plan = MobilityPlan::new(16, 20.0, Mobility::OUTWARD, SimTime::from_secs(60));
        let mut prev = plan.positions_at(SimTime::ZERO);
        for ms in (10..60_000).step_by(10) {
            let cur = plan.positions_at(SimTime::from_millis(ms));
            for (a, b) in prev.iter().zip(&cur) {
                assert!(a.distance(b) < 0.05);
            }
            prev = cur;
        }
    }

    #[test]
    fn static_plan_is_fixed() {
        let plan = MobilityPlan::new(4, 50.0, Mobility::Static, SimTime::from_secs(1));
        assert_eq!(plan.position_at(3, SimTime::from_secs(7)), NodePosition::new(50.0, 50.0));
    }
}
