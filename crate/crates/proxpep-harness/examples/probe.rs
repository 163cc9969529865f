use proxpep::driver::{run, schedule_params, ScheduleCoeffs};
use proxpep::model::derived_constants;
use proxpep_harness::generate::{generate_problem, Family};

fn main() {
    let program = generate_problem(Family::QuadTrig, 5, 2, 2, 0.05, 42).unwrap();
    for t in [256usize, 1024] {
        let params = schedule_params(t, &ScheduleCoeffs::default(), &program, program.constants.d0).unwrap();
        let consts = derived_constants(&program, params.sigma_g, params.sigma_h, program.constants.d0).unwrap();
        let traj = run(&program, &params, 1).unwrap();
        let s = &traj.summary;
        let fin = traj.states.last().unwrap();
        println!("=== T = {t}, T1 = {} ===", params.t1);
        println!("C_H = {}, sigma_h = {}, sum_dx = {}", consts.c_h, params.sigma_h, s.sum_dx);
        for j in 0..program.m {
            let mu_sum = fin.duals.mu_plus()[j] + fin.duals.mu_minus()[j];
            let bound = mu_sum / params.sigma_h + consts.c_h * s.sum_dx + s.sum_u_next[j];
            println!(
                "j={j}: sum|H| = {:.4}, bound = {:.4} (mu_sum/sigma = {:.4}, C_H sum_dx = {:.4}, sum_u = {:.4}) excess = {:.4}",
                s.sum_abs_h[j], bound, mu_sum / params.sigma_h, consts.c_h * s.sum_dx, s.sum_u_next[j],
                s.sum_abs_h[j] - bound
            );
        }
        for i in 0..program.p {
            let bound = fin.duals.lambda()[i] / params.sigma_g + consts.c_g * s.sum_dx;
            println!("i={i}: sum G = {:.4}, bound = {:.4}", s.sum_g[i], bound);
        }
        println!("checks: telescope_h viol = {}, max_excess = {:.6}", traj.checks.telescope_h.violations, traj.checks.telescope_h.max_excess);
        println!("final duals: lambda = {:?}", fin.duals.lambda());
        println!("  mu+ = {:?}", fin.duals.mu_plus());
        println!("  mu- = {:?}", fin.duals.mu_minus());
        println!("x final = {:?}", fin.x);
        let det = program.deterministic(&fin.x);
        println!("g(x) = {:?}, h(x) = {:?}", det.g, det.h);
    }
}
