//! Fixed-time plans and the safety interlock.
//!
//! cargo run --example signal_plans

use corridor_atsc::network::SiteKind;
use corridor_atsc::signal::{
    fixed_time_site, movements, IntersectionPhase, Interlock, MidBlockPhase, Phase, INTERSECTION_CYCLE_S,
    MIDBLOCK_CYCLE_S,
};

fn main() -> corridor_atsc::Result<()> {
    for (kind, cycle) in [(SiteKind::Intersection, INTERSECTION_CYCLE_S), (SiteKind::MidBlock, MIDBLOCK_CYCLE_S)] {
        println!("{kind:?} plan, cycle {cycle} s, movements {:?}", movements(kind));
        let mut last = None;
        for t in 0..cycle {
            let st = fixed_time_site(kind, t);
            if last != Some((st.phase, st.interval)) {
                println!("  t={t:>3}  {:?} {:?}  lights {}", st.phase, st.interval, st.lights.code());
                last = Some((st.phase, st.interval));
            }
        }
    }

    // A phase request goes through yellow and all-red before engaging.
    let mut lock = Interlock::new(Phase::MidBlock(MidBlockPhase::VehicleFlow));
    lock.request(Phase::MidBlock(MidBlockPhase::PedestrianCrossing))?;
    println!("\nmid-block switch to pedestrian crossing:");
    for t in 0..8 {
        let (lights, _) = lock.advance();
        println!("  step {t}  {:?}  {}", lock.current(), lights.code());
    }

    let mut lock = Interlock::new(Phase::Intersection(IntersectionPhase::ArterialFlow));
    lock.request(Phase::Intersection(IntersectionPhase::AllPedestrian))?;
    println!("\nintersection switch to all-pedestrian:");
    for t in 0..8 {
        let (lights, _) = lock.advance();
        assert!(!lights.has_conflict());
        println!("  step {t}  {:?}  {}", lock.current(), lights.code());
    }
    Ok(())
}
