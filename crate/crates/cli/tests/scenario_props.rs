use filippov_cli::scenario::{parse_scenario, parse_scenario_with, Task};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![-10.0..10.0f64, (-20i32..20).prop_map(f64::from), Just(0.1), Just(-1e-7)]
}

fn text(dim: usize, lo: &[f64], p0: &[f64], t: f64, res: usize, bloat: usize, rtol: Option<f64>) -> String {
    let list = |v: &[f64]| format!("[{}]", v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "));
    let hi: Vec<f64> = lo.iter().map(|x| x + 1.0).collect();
    let x = vec!["1"; dim].join(", ");
    let y = vec!["-x1"; dim].join(", ");
    let mut s = format!(
        "name = \"r\"\ndimension = {dim}\nX = \"{x}\"\nY = \"{y}\"\nh = \"x{dim} - 0.5\"\n\
         domain.lo = {}\ndomain.hi = {}\n",
        list(lo),
        list(&hi)
    );
    if let Some(r) = rtol {
        s.push_str(&format!("tolerances.rtol = {r:?}\n"));
    }
    s.push_str(&format!(
        "task simulate {{ p0 = {}; T = {t:?} }}\ntask conley {{ resolution = {res} bloat = {bloat} tauFraction = 0.25 }}\n",
        list(p0)
    ));
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_form_round_trips(
        dim in 2usize..=3,
        lo in proptest::collection::vec(coord(), 3),
        p0 in proptest::collection::vec(coord(), 3),
        t in 0.0..100.0f64,
        res in 4usize..300,
        bloat in 0usize..4,
        rtol in proptest::option::of(1e-14..1e-3f64),
    ) {
        let src = text(dim, &lo[..dim], &p0[..dim], t, res, bloat, rtol);
        let s = parse_scenario(&src).unwrap();
        let again = parse_scenario(&s.to_string()).unwrap();
        prop_assert_eq!(&again, &s);
        prop_assert_eq!(again.to_string(), s.to_string());
    }

    #[test]
    fn overrides_replace_values(res in 4usize..500, t in 0.0..50.0f64) {
        let src = text(2, &[0.0, 0.0], &[0.5, 0.5], 1.0, 8, 1, None);
        let sets = vec![format!("conley.resolution={res}"), format!("simulate.T={t:?}")];
        let s = parse_scenario_with(&src, &sets).unwrap();
        let mut seen = 0;
        for task in &s.tasks {
            match task {
                Task::Conley(c) => { prop_assert_eq!(c.resolution, res); seen += 1; }
                Task::Simulate(sim) => { prop_assert_eq!(sim.t, t); seen += 1; }
                _ => {}
            }
        }
        prop_assert_eq!(seen, 2);
    }

    #[test]
    fn garbage_never_panics(src in "[a-z0-9 =\\[\\]{},.\"#\\n-]{0,80}") {
        let _ = parse_scenario(&src);
    }
}
