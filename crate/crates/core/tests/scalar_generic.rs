use mcflow::lp::{verify_farkas, Feasibility, FlowModel};
use mcflow::scenario::Scenario;
use mcflow::{BigRational, LpScalar, MinCostExact, MinCostF64, Rational};

fn star() -> FlowModel {
    let inst = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/star.json"))
        .unwrap()
        .instance(0)
        .unwrap();
    FlowModel::multicast(&inst.network, &inst.service, &inst.rates()).unwrap()
}

fn boundary_and_cost<T: LpScalar>(model: &FlowModel) -> (f64, f64) {
    let b = model.max_load::<T>().unwrap().unwrap().to_f64_lossy();
    let c = model.min_cost::<T>(&Rational::new(1, 2)).unwrap().cost.to_f64_lossy();
    (b, c)
}

#[test]
fn all_scalars_agree_on_the_star() {
    let model = star();
    let exact = boundary_and_cost::<BigRational>(&model);
    let double = boundary_and_cost::<f64>(&model);
    let single = boundary_and_cost::<f32>(&model);
    assert_eq!(exact, (2.0, 0.75));
    assert!((double.0 - exact.0).abs() < 1e-9 && (double.1 - exact.1).abs() < 1e-9);
    assert!((single.0 - exact.0).abs() < 1e-4 && (single.1 - exact.1).abs() < 1e-4);
}

#[test]
fn aliases_name_the_backends() {
    let model = star();
    let exact: MinCostExact = model.min_cost(&Rational::from_integer(1)).unwrap();
    let float: MinCostF64 = model.min_cost(&Rational::from_integer(1)).unwrap();
    assert_eq!(exact.cost, BigRational::new(3.into(), 2.into()));
    assert!((float.cost - 1.5).abs() < 1e-9);
}

#[test]
fn exact_infeasibility_carries_a_certificate() {
    let model = star();
    match model.feasibility::<BigRational>(&Rational::new(5, 2)).unwrap() {
        Feasibility::Infeasible(cert) => {
            assert!(verify_farkas(&model.program::<BigRational>(&Rational::new(5, 2), false), &cert))
        }
        Feasibility::Feasible(_) => panic!("load beyond the boundary was feasible"),
    }
}
