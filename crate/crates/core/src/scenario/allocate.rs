use std::collections::BTreeMap;

use crate::geom::Point;

/// Greedy sample allocation.
///
/// Every point belongs to its nearest sampler (ties to the lower sampler
/// id); each sampler then targets the nearest point it owns (ties to the
/// lower point id), or nothing. No point is ever given to two samplers.
pub fn greedy_allocate(samplers: &[(usize, Point)], points: &[(usize, Point)]) -> BTreeMap<usize, Option<usize>> {
    let mut best: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for &(pid, p) in points {
        let owner = samplers
            .iter()
            .map(|(sid, s)| (s.distance_sq(&p), *sid))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((d, sid)) = owner else {
            continue;
        };
        let slot = best.entry(sid).or_insert((d, pid));
        if d < slot.0 || (d == slot.0 && pid < slot.1) {
            *slot = (d, pid);
        }
    }
    samplers
        .iter()
        .map(|(sid, _)| (*sid, best.get(sid).map(|(_, pid)| *pid)))
        .collect()
}
