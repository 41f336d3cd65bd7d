use scbf_core::bounds::{solve_kappa, PosteriorInputs};
use scbf_core::pipeline::{synthesize, Prepared, Verdict};
use scbf_core::scp::RowTag;
use scbf_core::{CertificateReport, RoomTemperature, SynthesisConfig};

const CONFIG: &str = r#"
[plant]
name = "room-temp"

[regions]
states = [[22.5, 26.5]]
inputs = [[0.0, 1.0]]
initial = [[[24.0, 25.0]]]
unsafe = [[[22.5, 23.0]], [[26.0, 26.5]]]

[property]
horizon = 5

[template]
barrier_degree = 4
controller_degree = 4

[certificate]
beta = 0.05
samples = 60000
validation_samples = 30000
barrier_norm = 0.1
controller_norm = 0.05
seed = 5
validation_seed = 6

[grid]
initial = 1001
unsafe = 501
states = 1001
"#;

fn certified() -> (SynthesisConfig, CertificateReport) {
    let cfg = SynthesisConfig::from_toml(CONFIG).unwrap();
    let report = synthesize(&cfg, &RoomTemperature).unwrap();
    (cfg, report)
}

#[test]
fn certified_report_invariants() {
    let (cfg, report) = certified();
    assert_eq!(report.verdict, Verdict::Certified, "{report:?}");
    let margin = report.margin.unwrap();
    assert!(margin <= 0.0);
    assert_ne!(report.seeds.scenario, report.seeds.validation.unwrap());

    // the confidence level reproduces from the stored counts
    let kappa = solve_kappa(&PosteriorInputs {
        n: report.n,
        n0: report.n0.unwrap(),
        n_star: report.n_star.unwrap(),
        r: report.r.unwrap(),
        beta: report.beta,
    })
    .unwrap();
    assert!((kappa - report.kappa.unwrap()).abs() <= 1e-9);

    // the embedded controller satisfies the input rows of its own program;
    // the assembled rows carry the solve-time back-off, added back here
    let prep = Prepared::new(&cfg).unwrap();
    let p = prep.problem(&[]).unwrap();
    let columns = report.columns.as_ref().unwrap();
    let back_off = report.lp.as_ref().unwrap().back_off;
    for i in (0..p.len()).filter(|&i| p.tag(i) == RowTag::G4) {
        assert!(p.residual(i, columns) - back_off <= 0.0, "row {i}");
    }
    let cert = report.certificate.as_ref().unwrap();
    let states = cfg.states.grid(1001).unwrap();
    for x in &states.points {
        let u = cert.control(x).unwrap()[0];
        assert!((0.0..=1.0).contains(&u), "C({x:?}) = {u}");
    }

    let back = CertificateReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn fixed_seeds_reproduce_bit_for_bit() {
    let (_, a) = certified();
    let (_, b) = certified();
    assert_eq!(a.d_star, b.d_star);
    assert_eq!((a.n_star, a.r), (b.n_star, b.r));
    assert_eq!(a.kappa.map(f64::to_bits), b.kappa.map(f64::to_bits));
    assert_eq!(a.margin.map(f64::to_bits), b.margin.map(f64::to_bits));
}

#[test]
fn all_violations_collapse_confidence() {
    // R = N0 is the worst validation outcome: no confidence level survives
    let (_, report) = certified();
    let inputs = PosteriorInputs {
        n: report.n,
        n0: report.n0.unwrap(),
        n_star: report.n_star.unwrap(),
        r: report.n0.unwrap(),
        beta: report.beta,
    };
    match solve_kappa(&inputs) {
        Err(_) => {}
        Ok(k) => assert!(k < report.kappa.unwrap()),
    }
}
