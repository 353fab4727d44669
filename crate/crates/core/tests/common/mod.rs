#![allow(dead_code)]

pub mod solver;

use gcid::ivp::{DecisionSpace, PiecewiseObjective};
use gcid::opinion::{
    attention_step, opinion_step, CouplingTensor, EngineParams, NeighborOpinionView, OpinionInput, OpinionState,
};

/// Full network state: one opinion vector and one attention per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    pub z: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

impl NetState {
    pub fn max_abs_diff(&self, other: &NetState) -> f64 {
        let dz = self
            .z
            .iter()
            .flatten()
            .zip(other.z.iter().flatten())
            .map(|(a, b)| (a - b).abs());
        let du = self.u.iter().zip(&other.u).map(|(a, b)| (a - b).abs());
        dz.chain(du).fold(0.0, f64::max)
    }
}

fn gain_intra(c: &CouplingTensor, j: usize, l: usize) -> f64 {
    if j == l {
        c.alpha_self[j]
    } else {
        c.gamma_self[j][l]
    }
}

fn gain_inter(c: &CouplingTensor, j: usize, l: usize) -> f64 {
    if j == l {
        c.a_same[j]
    } else {
        c.a_diff[j][l]
    }
}

/// Right-hand side of the coupled opinion/attention system on a complete
/// graph, written out directly from the model equations.
pub fn reference_rhs(s: &NetState, b: &[Vec<f64>], p: &EngineParams) -> NetState {
    let agents = s.z.len();
    let n = s.z[0].len();
    let c = &p.coupling;
    let a = &p.attention;
    let hill = |y: f64| {
        let yn = y.powf(a.hill_n);
        a.u_min + (a.u_max - a.u_min) * yn / (a.hill_half.powf(a.hill_n) + yn)
    };
    let mut dz = vec![vec![0.0; n]; agents];
    let mut du = vec![0.0; agents];
    for i in 0..agents {
        let mut f = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                let others: f64 = (0..agents).filter(|&k| k != i).map(|k| s.z[k][l]).sum();
                acc += (gain_intra(c, j, l) * s.z[i][l] + gain_inter(c, j, l) * others).tanh();
            }
            f[j] = -c.resistance * s.z[i][j] + s.u[i] * acc + b[i][j];
        }
        let mean = f.iter().sum::<f64>() / n as f64;
        for j in 0..n {
            dz[i][j] = f[j] - mean;
        }
        let own = if p.attention_self_loop {
            s.z[i].iter().map(|v| v * v).sum::<f64>()
        } else {
            0.0
        };
        let others: f64 = (0..agents)
            .filter(|&k| k != i)
            .flat_map(|k| s.z[k].iter())
            .map(|v| v * v)
            .sum();
        du[i] = (-s.u[i] + hill((own + others) / n as f64)) / a.tau_u;
    }
    NetState { z: dz, u: du }
}

fn axpy(s: &NetState, h: f64, d: &NetState) -> NetState {
    NetState {
        z: s
            .z
            .iter()
            .zip(&d.z)
            .map(|(zi, di)| zi.iter().zip(di).map(|(a, b)| a + h * b).collect())
            .collect(),
        u: s.u.iter().zip(&d.u).map(|(a, b)| a + h * b).collect(),
    }
}

/// Classical fourth-order Runge-Kutta, sampling the state every
/// `sample_every` steps (the initial state included).
pub fn rk4(s0: &NetState, b: &[Vec<f64>], p: &EngineParams, h: f64, steps: usize, sample_every: usize) -> Vec<NetState> {
    let mut s = s0.clone();
    let mut out = vec![s.clone()];
    for k in 1..=steps {
        let k1 = reference_rhs(&s, b, p);
        let k2 = reference_rhs(&axpy(&s, h / 2.0, &k1), b, p);
        let k3 = reference_rhs(&axpy(&s, h / 2.0, &k2), b, p);
        let k4 = reference_rhs(&axpy(&s, h, &k3), b, p);
        let sum = axpy(&axpy(&axpy(&k1, 2.0, &k2), 2.0, &k3), 1.0, &k4);
        s = axpy(&s, h / 6.0, &sum);
        if k % sample_every == 0 {
            out.push(s.clone());
        }
    }
    out
}

/// Synchronous forward Euler over the library's per-agent steps: every
/// agent sees the others' opinions from the start of the step.
pub fn euler_network(
    s0: &NetState,
    b: &[Vec<f64>],
    p: &EngineParams,
    dt: f64,
    steps: usize,
    sample_every: usize,
    attention: bool,
) -> Vec<NetState> {
    let agents = s0.z.len();
    let inputs: Vec<OpinionInput> = b.iter().map(|bi| OpinionInput { b: bi.clone() }).collect();
    let mut s = s0.clone();
    let mut out = vec![s.clone()];
    for k in 1..=steps {
        let mut next = s.clone();
        for i in 0..agents {
            let views: Vec<NeighborOpinionView> = (0..agents)
                .filter(|&k| k != i)
                .map(|k| NeighborOpinionView {
                    agent_id: k,
                    z: s.z[k].clone(),
                    u: None,
                    age: 0.0,
                })
                .collect();
            let state = OpinionState {
                z: s.z[i].clone(),
                u: s.u[i],
                time: 0.0,
            };
            let z = opinion_step(&state, &inputs[i], &views, &p.coupling, p.saturation, dt).expect("opinion step");
            next.z[i] = z.z;
            if attention {
                let u = attention_step(&state, &views, p.attention_self_loop, &p.attention, dt).expect("attention step");
                next.u[i] = u.u;
            }
        }
        s = next;
        if k % sample_every == 0 {
            out.push(s.clone());
        }
    }
    out
}

/// Argmax by visiting every grid point; ties go to the lowest linear index.
pub fn exhaustive_argmax(space: &DecisionSpace, objectives: &[PiecewiseObjective], weights: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    space.for_each_point(|i, p| {
        let mut total = 0.0;
        for (o, w) in objectives.iter().zip(weights) {
            if *w != 0.0 {
                total += w * o.evaluate(p);
            }
        }
        if total > best.1 {
            best = (i, total);
        }
    });
    best
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unhex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).expect("hex digit"))
        .collect()
}

pub struct Golden {
    pub resolution: gcid::net::Resolution,
    pub z_clip: f64,
    pub sender: u8,
    pub seq: u16,
    pub z: Vec<f64>,
    pub quantized: Vec<i32>,
    pub bytes: Vec<u8>,
}

pub fn golden_vectors() -> Vec<Golden> {
    let text = include_str!("../data/wire_golden.txt");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let list = |s: &str| s.split(',').map(str::to_owned).collect::<Vec<_>>();
            Golden {
                resolution: match f[0] {
                    "coarse" => gcid::net::Resolution::Coarse,
                    _ => gcid::net::Resolution::Fine,
                },
                z_clip: f[1].parse().unwrap(),
                sender: f[2].parse().unwrap(),
                seq: f[3].parse().unwrap(),
                z: list(f[4]).iter().map(|v| v.parse().unwrap()).collect(),
                quantized: list(f[5]).iter().map(|v| v.parse().unwrap()).collect(),
                bytes: unhex(f[6]),
            }
        })
        .collect()
}
