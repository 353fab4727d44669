use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{BloomParams, ScenarioParams, SensingParams, StormParams, Zone};
use crate::geom::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bloom {
    pub id: usize,
    pub zone: usize,
    pub center: Point,
    pub spawn_time: f64,
    pub growth_duration: f64,
    pub max_radius: f64,
    /// 0 means the bloom never dissipates.
    pub lifetime: f64,
    pub sampled: bool,
}

impl Bloom {
    /// Linear growth from zero to `max_radius` over `growth_duration`.
    pub fn radius(&self, t: f64) -> f64 {
        if t < self.spawn_time {
            return 0.0;
        }
        self.max_radius * ((t - self.spawn_time) / self.growth_duration).min(1.0)
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.spawn_time && (self.lifetime <= 0.0 || t < self.spawn_time + self.lifetime)
    }

    pub fn contains(&self, p: &Point, t: f64) -> bool {
        self.is_active(t) && p.distance(&self.center) <= self.radius(t)
    }
}

/// New bloom with a center uniform over `zone`.
pub fn spawn_bloom<R: Rng + ?Sized>(rng: &mut R, zone_index: usize, zone: &Zone, now: f64, params: &BloomParams) -> Bloom {
    let center = Point::new(
        zone.x + rng.gen::<f64>() * zone.width,
        zone.y + rng.gen::<f64>() * zone.height,
    );
    Bloom {
        id: 0,
        zone: zone_index,
        center,
        spawn_time: now,
        growth_duration: params.growth_duration_s,
        max_radius: params.max_radius_m,
        lifetime: params.lifetime_s,
        sampled: false,
    }
}

/// A disk crossing one zone along a straight east-west line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Storm {
    pub zone: usize,
    pub start: Point,
    pub end: Point,
    pub radius: f64,
    pub start_time: f64,
    pub duration: f64,
}

impl Storm {
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start_time && t < self.start_time + self.duration
    }

    pub fn center(&self, t: f64) -> Point {
        let f = ((t - self.start_time) / self.duration).clamp(0.0, 1.0);
        Point::new(
            self.start.x + f * (self.end.x - self.start.x),
            self.start.y + f * (self.end.y - self.start.y),
        )
    }

    pub fn covers(&self, p: &Point, t: f64) -> bool {
        self.is_active(t) && self.center(t).distance(p) <= self.radius
    }

    fn random<R: Rng + ?Sized>(rng: &mut R, zone_index: usize, zone: &Zone, start_time: f64, params: &StormParams) -> Self {
        let y = zone.y + rng.gen::<f64>() * zone.height;
        // enter and leave with the disk's leading edge just touching the zone
        let west = Point::new(zone.x - params.radius_m * 0.5, y);
        let east = Point::new(zone.x + zone.width + params.radius_m * 0.5, y);
        let (start, end) = if rng.gen::<bool>() { (west, east) } else { (east, west) };
        Storm {
            zone: zone_index,
            start,
            end,
            radius: params.radius_m,
            start_time,
            duration: params.transit_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Available,
    Claimed,
    Sampled,
    /// The source bloom dissipated before anyone sampled here.
    Expired,
}

impl SampleStatus {
    /// Still worth traveling to.
    pub fn is_open(self) -> bool {
        matches!(self, SampleStatus::Available | SampleStatus::Claimed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub id: usize,
    pub location: Point,
    pub bloom_id: usize,
    pub status: SampleStatus,
}

/// Environment event, appended to the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvEvent {
    BloomSpawned { bloom: usize, zone: usize, x: f64, y: f64 },
    BloomExpired { bloom: usize },
    StormStarted { zone: usize },
    StormEnded { zone: usize },
    Detection { agent: usize, point: usize, bloom: usize },
    Sampled { agent: usize, point: usize, bloom: usize },
}

/// Turbidity sensing: inside an active bloom, detect with probability
/// `p_max * max(0, 1 - speed / speed_cutoff)`. Returns the bloom detected.
pub fn sense_turbidity<R: Rng + ?Sized>(
    position: &Point,
    speed: f64,
    blooms: &[Bloom],
    now: f64,
    params: &SensingParams,
    rng: &mut R,
) -> Option<usize> {
    let bloom = blooms.iter().find(|b| b.contains(position, now))?;
    let p = detection_probability(speed, params);
    if p > 0.0 && rng.gen::<f64>() < p {
        Some(bloom.id)
    } else {
        None
    }
}

pub(crate) fn detection_probability(speed: f64, params: &SensingParams) -> f64 {
    params.p_max * (1.0 - speed / params.speed_cutoff).max(0.0)
}

/// Scheduled blooms and storms plus the shared sample-point board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub zones: Vec<Zone>,
    pub blooms: Vec<Bloom>,
    pub storms: Vec<Storm>,
    pub samples: Vec<SamplePoint>,
    dedupe_radius: f64,
    announced: usize,
    expired: Vec<bool>,
    storm_state: Vec<u8>,
}

impl Environment {
    /// Pre-draws every bloom and storm of an episode from `rng`, so the
    /// schedule does not depend on what the agents do.
    pub fn generate<R: Rng + ?Sized>(params: &ScenarioParams, duration: f64, rng: &mut R) -> Self {
        let mut blooms = Vec::new();
        if params.bloom.spawn_mean_interval_s > 0.0 {
            let exp = Exp::new(1.0 / params.bloom.spawn_mean_interval_s).expect("positive rate");
            for (zi, zone) in params.zones.iter().enumerate() {
                let mut t = exp.sample(rng);
                while t < duration {
                    blooms.push(spawn_bloom(rng, zi, zone, t, &params.bloom));
                    t += exp.sample(rng);
                }
            }
        }
        blooms.sort_by(|a, b| a.spawn_time.total_cmp(&b.spawn_time).then(a.zone.cmp(&b.zone)));
        for (i, b) in blooms.iter_mut().enumerate() {
            b.id = i;
        }

        let mut storms = Vec::new();
        if params.storm.mean_interval_s > 0.0 {
            let exp = Exp::new(1.0 / params.storm.mean_interval_s).expect("positive rate");
            let mut t = params.storm.earliest_s + exp.sample(rng);
            while t < duration {
                let zi = rng.gen_range(0..params.zones.len());
                storms.push(Storm::random(rng, zi, &params.zones[zi], t, &params.storm));
                t += params.storm.transit_s + exp.sample(rng);
            }
        }
        Self::with_schedule(params, blooms, storms)
    }

    pub fn with_schedule(params: &ScenarioParams, blooms: Vec<Bloom>, storms: Vec<Storm>) -> Self {
        let n_blooms = blooms.len();
        let n_storms = storms.len();
        Environment {
            zones: params.zones.clone(),
            blooms,
            storms,
            samples: Vec::new(),
            dedupe_radius: params.sensing.dedupe_radius_m,
            announced: 0,
            expired: vec![false; n_blooms],
            storm_state: vec![0; n_storms],
        }
    }

    /// Moves the clock to `now`: announces spawns, dissipates blooms
    /// (expiring their open sample points) and starts/ends storms.
    pub fn advance(&mut self, now: f64) -> Vec<EnvEvent> {
        let mut events = Vec::new();
        while self.announced < self.blooms.len() && self.blooms[self.announced].spawn_time <= now {
            let b = &self.blooms[self.announced];
            events.push(EnvEvent::BloomSpawned {
                bloom: b.id,
                zone: b.zone,
                x: b.center.x,
                y: b.center.y,
            });
            self.announced += 1;
        }
        for i in 0..self.announced {
            if !self.expired[i] && !self.blooms[i].is_active(now) {
                self.expired[i] = true;
                events.push(EnvEvent::BloomExpired { bloom: i });
                for s in self.samples.iter_mut().filter(|s| s.bloom_id == i) {
                    if s.status.is_open() {
                        s.status = SampleStatus::Expired;
                    }
                }
            }
        }
        for (i, storm) in self.storms.iter().enumerate() {
            if self.storm_state[i] == 0 && storm.is_active(now) {
                self.storm_state[i] = 1;
                events.push(EnvEvent::StormStarted { zone: storm.zone });
            }
            if self.storm_state[i] == 1 && !storm.is_active(now) {
                self.storm_state[i] = 2;
                events.push(EnvEvent::StormEnded { zone: storm.zone });
            }
        }
        events
    }

    pub fn active_blooms(&self, now: f64) -> impl Iterator<Item = &Bloom> {
        self.blooms[..self.announced].iter().filter(move |b| b.is_active(now))
    }

    /// Storm currently over `p`, if any.
    pub fn storm_at(&self, p: &Point, now: f64) -> Option<&Storm> {
        self.storms.iter().find(|s| s.covers(p, now))
    }

    /// Publishes a detection as a new sample point unless one is already
    /// known nearby. Returns the new point's id.
    pub fn publish_detection(&mut self, location: Point, bloom_id: usize) -> Option<usize> {
        let r2 = self.dedupe_radius * self.dedupe_radius;
        if self.samples.iter().any(|s| s.location.distance_sq(&location) <= r2) {
            return None;
        }
        let id = self.samples.len();
        self.samples.push(SamplePoint {
            id,
            location,
            bloom_id,
            status: SampleStatus::Available,
        });
        Some(id)
    }

    pub fn open_samples(&self) -> impl Iterator<Item = &SamplePoint> {
        self.samples.iter().filter(|s| s.status.is_open())
    }

    pub fn has_open_samples(&self) -> bool {
        self.open_samples().next().is_some()
    }

    /// Resets claims; the harness re-marks this tick's allocations.
    pub fn release_claims(&mut self) {
        for s in &mut self.samples {
            if s.status == SampleStatus::Claimed {
                s.status = SampleStatus::Available;
            }
        }
    }

    pub fn claim(&mut self, point: usize) {
        if let Some(s) = self.samples.get_mut(point) {
            if s.status == SampleStatus::Available {
                s.status = SampleStatus::Claimed;
            }
        }
    }

    /// Marks a point sampled. Returns its bloom id if it was still open.
    pub fn complete_sample(&mut self, point: usize) -> Option<usize> {
        let s = self.samples.get_mut(point)?;
        if !s.status.is_open() {
            return None;
        }
        s.status = SampleStatus::Sampled;
        let bloom = s.bloom_id;
        self.blooms[bloom].sampled = true;
        Some(bloom)
    }
}
