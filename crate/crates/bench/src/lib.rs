//! Fixtures shared by the benchmarks in `benches/`.

use expflow::flows::{fb1_rhs, fb2_rhs, grad2_rhs};
use expflow::problems::by_name;
use expflow::{FlowRhs, InitialState, ProblemInstance, Schedule, Vector};

pub fn problem(name: &str) -> ProblemInstance {
    by_name(name).expect("registry entry")
}

/// First-order forward-backward flow with `λ ≡ 1`, `η = 1`.
pub fn fb1(p: &ProblemInstance, eta: f64) -> FlowRhs {
    fb1_rhs(p.a.clone(), p.b.clone(), eta, Schedule::constant(1.0, None)).expect("valid flow")
}

/// Second-order forward-backward flow with `λ ≡ 40`, `γ ≡ 11`, `η = 0.5`.
pub fn fb2(p: &ProblemInstance) -> FlowRhs {
    fb2_rhs(p.a.clone(), p.b.clone(), 0.5, Schedule::constant(40.0, Some(11.0))).expect("valid flow")
}

pub fn grad2(p: &ProblemInstance) -> FlowRhs {
    let sched = Schedule::constant(1.5, Some(2.4)).alpha(expflow::Profile::constant(1.5));
    grad2_rhs(p.g.clone().expect("smooth instance"), sched).expect("valid flow")
}

/// Alternating `±1` start of the given dimension.
pub fn start(dim: usize, order: usize) -> InitialState {
    let x0 = Vector::from_fn(dim, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    if order == 1 {
        InitialState::first_order(x0)
    } else {
        InitialState::second_order(x0, Vector::zeros(dim))
    }
}
