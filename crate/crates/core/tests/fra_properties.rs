use facred_core::fra::{
    compute_ell, reduced_program, run_facial_reduction, verify_certificate_chain, FraOptions,
};
use facred_core::generate::{degenerate_instance, sample_feasible_slacks};
use facred_core::Tolerances;

#[test]
fn random_degenerate_instances() {
    let tol = Tolerances::default();
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let inst = degenerate_instance(seed);
        let p = &inst.program;
        let cert = match run_facial_reduction(p, &FraOptions::default()) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        for (i, w) in cert.faces.windows(2).enumerate() {
            let dropped = w[1].dim() < w[0].dim();
            if !w[1].is_subface_of(&w[0], 1e-6) || dropped != cert.reducing[i + 1] {
                failures.push(format!("seed {seed}: chain not monotone at step {}", i + 1));
            }
        }
        let ell = compute_ell(p);
        if cert.reducing_steps() > ell {
            failures.push(format!(
                "seed {seed}: {} steps > ell {ell}",
                cert.reducing_steps()
            ));
        }
        if !cert.final_face().approx_eq(&inst.face, 1e-6) {
            failures.push(format!(
                "seed {seed}: final face {} differs from planted {}",
                cert.final_face(),
                inst.face
            ));
        }
        let report = verify_certificate_chain(p, &cert, &tol);
        if !report.passed() {
            failures.push(format!("seed {seed}: verification failed\n{report}"));
        }
        for s in sample_feasible_slacks(&inst, 5, seed) {
            for (i, f) in cert.faces.iter().enumerate() {
                let off = f.project_complement(&s).max_abs();
                let viol = f.compress(&s).cone_violation();
                if off > 1e-7 || viol > 1e-7 {
                    failures.push(format!(
                        "seed {seed}: slack leaves F_{i} ({off:e}, {viol:e})"
                    ));
                }
            }
        }
        match reduced_program(p, &cert, &tol) {
            Ok(red) => match run_facial_reduction(&red.program, &FraOptions::default()) {
                Ok(again) if again.reducing_steps() == 0 => {}
                Ok(again) => failures.push(format!(
                    "seed {seed}: reduced program took {} steps",
                    again.reducing_steps()
                )),
                Err(e) => failures.push(format!("seed {seed}: reduced program: {e}")),
            },
            Err(e) => failures.push(format!("seed {seed}: reduced program: {e}")),
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
