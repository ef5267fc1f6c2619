// scratch: deficient-basis candidates on desk-attitude
use dmrac::config::{builtin, Task};
use dmrac::numerics::rng::RngState;
use dmrac::plant::{BasisFn, FixedBasis};
use dmrac::sim::{run_baseline, run_episode, BaselineBasis};

fn main() {
    let desk = builtin("desk-attitude").unwrap();
    let setup = desk.setup(Task::Train).unwrap();
    let mut rng_a = RngState::new(desk.sim.seed);
    let net = desk.build_network(&mut rng_a);
    let gains_net = desk.gains(net.feature_dim()).unwrap();
    let adaptive = run_episode(&setup, &gains_net, net, &mut rng_a).unwrap();
    println!("dmrac adaptive rms_q4 {:.4}", adaptive.trace.rms_error_final_quarter());

    let candidates: Vec<(&str, Vec<BasisFn>)> = vec![
        ("[1, x0, x1]", vec![BasisFn::One, BasisFn::Coord(0), BasisFn::Coord(1)]),
        ("[1, x1]", vec![BasisFn::One, BasisFn::Coord(1)]),
        ("[x0, x1]", vec![BasisFn::Coord(0), BasisFn::Coord(1)]),
        ("[1]", vec![BasisFn::One]),
    ];
    for (name, funcs) in candidates {
        let basis = FixedBasis::new(funcs);
        let gains = desk.gains(basis.dim()).unwrap();
        let mut rng = RngState::new(desk.sim.seed);
        let out = run_baseline(&setup, &gains, Some(&BaselineBasis::Fixed(basis)), &mut rng).unwrap();
        println!("fixed {name}: rms_q4 {:.4}", out.trace.rms_error_final_quarter());
    }
}
