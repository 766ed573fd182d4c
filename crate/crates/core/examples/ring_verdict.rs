use mc_core::channel::{ChannelTopology, TimeUnit};
use mc_core::reaction::LinearDecayModel;
use mc_core::{verdict, ContourOptions, VerdictOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = LinearDecayModel::new(1.0)?;
    let topo = ChannelTopology::ring_uniform(3, 40.0, 200.0, TimeUnit::Seconds)?;
    let opts = VerdictOptions {
        contour: ContourOptions {
            flux_gain: 1.0,
            ..ContourOptions::default()
        },
        ..VerdictOptions::default()
    };
    let v = verdict(&model, &topo, &opts)?;
    println!("stable: {} (P = {})", v.stable, v.p_count);
    Ok(())
}
