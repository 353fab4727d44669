use gcid::geom::Point;
use gcid::ivp::{
    make_station_keep_objective, make_transit_objective, solve, DecisionSpace, DecisionVariable, Piece,
    PiecewiseObjective,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn coarse_helm(rng: &mut ChaCha8Rng) -> DecisionSpace {
    let heading_step = [15.0, 30.0, 45.0, 90.0][rng.gen_range(0..4)];
    let speed_step = [0.25, 0.5, 1.0][rng.gen_range(0..3)];
    DecisionSpace::helm(heading_step, 2.0, speed_step).unwrap()
}

pub fn three_var(rng: &mut ChaCha8Rng) -> DecisionSpace {
    let var = |name: &str, max: f64, step: f64| DecisionVariable {
        name: name.into(),
        min: 0.0,
        max,
        step,
        periodic: false,
    };
    DecisionSpace::new(vec![
        var("a", 4.0, [0.5, 1.0][rng.gen_range(0..2)]),
        var("b", 3.0, 1.0),
        var("c", 2.0, [0.5, 1.0][rng.gen_range(0..2)]),
    ])
    .unwrap()
}

/// Boxes over a random split of every axis, each with its own linear
/// function; integer-valued coefficients make exact ties common.
pub fn random_pieces(space: &DecisionSpace, rng: &mut ChaCha8Rng) -> PiecewiseObjective {
    let vars = space.variables();
    let cuts: Vec<f64> = vars.iter().map(|v| rng.gen_range(v.min..v.max)).collect();
    let mut pieces = Vec::new();
    for mask in 0..(1usize << vars.len()) {
        let (lower, upper) = vars
            .iter()
            .enumerate()
            .map(|(k, v)| {
                if mask >> k & 1 == 0 {
                    (v.min, cuts[k])
                } else {
                    (cuts[k], v.max)
                }
            })
            .unzip();
        pieces.push(Piece {
            lower,
            upper,
            intercept: f64::from(rng.gen_range(0..50)),
            slopes: vars.iter().map(|_| f64::from(rng.gen_range(-3..=3))).collect(),
        });
    }
    PiecewiseObjective::from_pieces("pieces", pieces, f64::from(rng.gen_range(0..10)))
}

pub fn random_objectives(space: &DecisionSpace, rng: &mut ChaCha8Rng) -> (Vec<PiecewiseObjective>, Vec<f64>) {
    let count = rng.gen_range(1..=4);
    let helm = space.variable_index("heading").is_some();
    let mut objectives = Vec::new();
    for k in 0..count {
        let o = match rng.gen_range(0..4) {
            0 if helm => {
                let own = Point::new(rng.gen_range(0.0..300.0), rng.gen_range(0.0..300.0));
                let goal = Point::new(rng.gen_range(0.0..300.0), rng.gen_range(0.0..300.0));
                make_transit_objective(format!("t{k}"), own, goal, rng.gen_range(0.0..2.0), space).unwrap()
            }
            1 if helm => make_station_keep_objective(format!("s{k}"), space).unwrap(),
            2 => {
                let c: Vec<f64> = (0..space.variables().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                PiecewiseObjective::from_fn(format!("f{k}"), move |x| {
                    x.iter().zip(&c).map(|(v, w)| (v * w).sin()).sum::<f64>() * 10.0
                })
            }
            _ => random_pieces(space, rng),
        };
        objectives.push(o);
    }
    let mut weights: Vec<f64> = (0..count)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { f64::from(rng.gen_range(1..5)) })
        .collect();
    if weights.iter().all(|w| *w == 0.0) {
        weights[0] = 1.0;
    }
    (objectives, weights)
}

/// Runs the 200-case comparison and returns how many matched exactly.
pub fn agreement(seed: u64, cases: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matched = 0;
    for case in 0..cases {
        let space = if case % 3 == 2 { three_var(&mut rng) } else { coarse_helm(&mut rng) };
        let (objectives, weights) = random_objectives(&space, &mut rng);
        let got = solve(&space, &objectives, &weights).unwrap();
        let (idx, utility) = super::exhaustive_argmax(&space, &objectives, &weights);
        if got.values == space.point(idx) && got.utility == utility {
            matched += 1;
        }
    }
    matched
}
