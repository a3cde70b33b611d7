use loglab_core::numerics::*;
use loglab_core::ratio;
use loglab_core::tuner::*;
use std::time::Instant;

fn main() {
    let bracket = DyadicInterval::new(
        DyadicRational::from_f64(3.90).unwrap(),
        DyadicRational::from_f64(3.96).unwrap(),
    );
    let profile = TargetProfile::new(vec![(1, ratio::rat(1, 1))], ratio::rat(1, 8)).unwrap();
    let request = TuneRequest::new(bracket, profile, 0, 3);
    let t0 = Instant::now();
    match tune(&request, &TuneCache::disabled()) {
        Ok(out) => {
            println!("TUNED in {:?}", t0.elapsed());
            println!("  a* = {:?}", out.a_star);
            println!("  m+1 = {}", out.stage_length + 1);
            println!("  residual = {} (~{:.5})", ratio::to_pq(&out.residual), rat_f64(&out.residual));
            println!("  closure residual log2 = {}", out.closure_residual_log2);
            for r in out.mass_reports.iter().take(6) {
                println!("  orbit {} target {} mass {:.5}", r.orbit_index, ratio::to_pq(&r.target_weight), rat_f64(&r.achieved_mass));
            }
        }
        Err(e) => println!("ERR after {:?}: {e}", t0.elapsed()),
    }
}

fn rat_f64(r: &num_rational::BigRational) -> f64 {
    r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN)
        / r.denom().to_string().parse::<f64>().unwrap_or(1.0)
}
