//! Coverage search by Voronoi partitioning of a zone among explorers.

use serde::{Deserialize, Serialize};

use super::Zone;
use crate::geom::Point;

/// Per-agent record of which coverage cells of a zone have been seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitedGrid {
    origin_x_mm: i64,
    origin_y_mm: i64,
    cell_mm: i64,
    cols: usize,
    rows: usize,
    visited: Vec<bool>,
}

impl VisitedGrid {
    pub fn new(zone: &Zone, cell: f64) -> Self {
        let cols = (zone.width / cell).ceil().max(1.0) as usize;
        let rows = (zone.height / cell).ceil().max(1.0) as usize;
        VisitedGrid {
            origin_x_mm: (zone.x * 1000.0).round() as i64,
            origin_y_mm: (zone.y * 1000.0).round() as i64,
            cell_mm: (cell * 1000.0).round() as i64,
            cols,
            rows,
            visited: vec![false; cols * rows],
        }
    }

    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }

    fn cell(&self) -> f64 {
        self.cell_mm as f64 / 1000.0
    }

    /// Center of cell `idx` (row-major, south row first).
    pub fn center(&self, idx: usize) -> Point {
        let (r, c) = (idx / self.cols, idx % self.cols);
        let cell = self.cell();
        Point::new(
            self.origin_x_mm as f64 / 1000.0 + (c as f64 + 0.5) * cell,
            self.origin_y_mm as f64 / 1000.0 + (r as f64 + 0.5) * cell,
        )
    }

    pub fn is_visited(&self, idx: usize) -> bool {
        self.visited[idx]
    }

    pub fn set_visited(&mut self, idx: usize) {
        self.visited[idx] = true;
    }

    /// Marks every cell whose center lies within `radius` of `p`.
    pub fn mark(&mut self, p: &Point, radius: f64) {
        let r2 = radius * radius;
        for idx in 0..self.visited.len() {
            if !self.visited[idx] && self.center(idx).distance_sq(p) <= r2 {
                self.visited[idx] = true;
            }
        }
    }

    pub fn all_visited(&self) -> bool {
        self.visited.iter().all(|v| *v)
    }

    pub fn unvisited_count(&self) -> usize {
        self.visited.iter().filter(|v| !**v).count()
    }

    pub fn reset(&mut self) {
        self.visited.iter_mut().for_each(|v| *v = false);
    }
}

/// Next survey waypoint for an explorer.
///
/// Unvisited cells are partitioned by nearest explorer (the agent wins
/// ties). The waypoint is the centroid of the agent's own unvisited cells;
/// once the agent sits on that centroid it heads for its nearest own
/// unvisited cell instead. With no unvisited cell of its own it takes the
/// nearest unvisited cell in the zone, and a fully visited zone is reset
/// and the zone center returned.
pub fn voronoi_explore_waypoint(position: &Point, fellows: &[Point], zone: &Zone, visited: &mut VisitedGrid, arrive_radius: f64) -> Point {
    if visited.all_visited() {
        visited.reset();
        return zone.center();
    }

    let mut own = Vec::new();
    let mut any_nearest: Option<(f64, usize)> = None;
    for idx in 0..visited.len() {
        if visited.is_visited(idx) {
            continue;
        }
        let c = visited.center(idx);
        let d = c.distance_sq(position);
        if any_nearest.is_none_or(|(best, _)| d < best) {
            any_nearest = Some((d, idx));
        }
        if fellows.iter().all(|f| d <= c.distance_sq(f)) {
            own.push((d, idx, c));
        }
    }

    if own.is_empty() {
        let (_, idx) = any_nearest.expect("some cell is unvisited");
        return visited.center(idx);
    }

    let centers: Vec<Point> = own.iter().map(|(_, _, c)| *c).collect();
    let centroid = Point::centroid(&centers).expect("non-empty");
    if centroid.distance(position) > arrive_radius {
        return centroid;
    }
    let (_, idx, _) = own
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("non-empty");
    visited.center(*idx)
}
