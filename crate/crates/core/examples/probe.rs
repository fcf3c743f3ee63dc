use meltloop::controller::{make_geometry, run_open_loop, GeometryName};
use meltloop::plant::{Discretization, MaterialProps, ProcessParams};

fn main() {
    // (slice_um, extinction_um)
    let cases = [(45.0, 20.0), (50.0, 20.0), (50.0, 25.0), (55.0, 20.0), (55.0, 25.0)];
    for (w_um, ext_um) in cases {
        let mut m = MaterialProps::<f64>::stainless_304l();
        m.extinction_depth = ext_um * 1e-6;
        let mut p = ProcessParams::nominal();
        p.slice_thickness = Some(w_um * 1e-6);
        let d = Discretization::derive(&p, &m).unwrap();
        let part = make_geometry(GeometryName::Brick, &p, &d).unwrap();
        for power in [100.0, 125.0] {
            let results = run_open_loop(&part, power, &m, &p).unwrap();
            let depth: Vec<f64> = results.iter().map(|r| r.layer_mean_depth * 1e6).collect();
            let esurf: Vec<f64> = results.iter().map(|r| r.end_surface_mean).collect();
            let strict_d = depth.windows(2).skip(1).all(|w| w[1] > w[0]);
            let strict_t = esurf.windows(2).skip(1).all(|w| w[1] > w[0]);
            println!(
                "w={w_um} ext={ext_um} u={power}: depth2_10_strict={strict_d} esurf2_10_strict={strict_t}"
            );
            println!(
                "  depth {:?}",
                depth.iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>()
            );
            println!(
                "  theta_last {:.0} esurf_last {:.0}",
                results.last().unwrap().theta,
                esurf.last().unwrap()
            );
        }
    }
}
