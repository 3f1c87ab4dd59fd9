use kincoach::generate::*;
use kincoach::skeleton::Joint;
use kincoach::cycles;
use kincoach::preprocess::gaussian_smooth;

fn main() {
    let spec = SessionSpec::new("squat", 5);
    let session = generate_session(&spec).unwrap();
    println!("truth: {:?}", session.truth_cycles.iter().map(|t| (t.i_s, t.i_e)).collect::<Vec<_>>());
    let dof = Joint::RightKnee.primary_dof();
    let raw: Vec<f64> = session.frames.iter().map(|f| f.q[dof]).collect();
    let smoothed = gaussian_smooth(&raw, 2.0).unwrap();
    let peaks = cycles::find_peaks(&smoothed, 0.1, 5).unwrap();
    println!("valleys: {:?}", peaks.valleys);
    println!("valley proms: {:?}", peaks.valley_prominences.iter().map(|p| (p * 57.3).round()).collect::<Vec<_>>());
    println!("peaks: {:?}", peaks.peaks);
    let cyc = cycles::detect_cycles(&raw, kincoach::skeleton::CycleMode::Repetitive).unwrap();
    println!("cycles: {:?}", cyc.iter().map(|c| (c.i_s, c.i_e)).collect::<Vec<_>>());
    for t in [18, 19, 20, 21, 22, 40, 41, 42, 43] {
        println!("frame {t}: {:.2} deg", smoothed[t].to_degrees());
    }
}
