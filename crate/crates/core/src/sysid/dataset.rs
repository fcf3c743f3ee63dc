use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::plant::{MaterialProps, MeltPoolState, Plant, ProcessParams};
use crate::scalar::{real, Real};
use crate::sysid::excitation::{generate_excitation, ExcitationSpec};

/// One layer of identification data: the N melt-pool samples, the N
/// applied powers, and the mean surface temperature measured over the
/// layer footprint before the powder was laid down.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord<T> {
    pub print_id: usize,
    pub layer_id: usize,
    pub theta: T,
    pub inputs: Vec<T>,
    pub states: Vec<MeltPoolState<T>>,
}

fn run_print<T: Real>(
    material: &MaterialProps<T>,
    process: &ProcessParams<T>,
    spec: &ExcitationSpec<T>,
    print_id: usize,
) -> Result<Vec<LayerRecord<T>>> {
    let mut plant = Plant::new(material.clone(), process.clone())
        .map_err(|e| Error::Config(format!("print {print_id}: {e}")))?;
    let n = process.n_intervals;
    let xi = vec![true; n];
    let footprint = plant.full_footprint();
    let mut records = Vec::with_capacity(spec.n_layers);
    for layer_id in 0..spec.n_layers {
        let theta = plant.measure_surface(footprint)?.mean_temp;
        plant.deposit_layer(footprint)?;
        let profile = generate_excitation(spec, n, print_id, layer_id);
        let samples = plant.scan_layer(&profile, &xi)?;
        records.push(LayerRecord {
            print_id,
            layer_id,
            theta,
            inputs: profile,
            states: samples.iter().map(|s| s.melt).collect(),
        });
        plant.cool_between_layers()?;
    }
    Ok(records)
}

/// Run the identification campaign: `n_prints` independent plants excited
/// layer by layer, in parallel, assembled in print order.
///
/// A plant failure aborts that print and surfaces as an error; no partial
/// data from a failed print is ever returned.
pub fn collect_dataset<T: Real>(
    material: &MaterialProps<T>,
    process: &ProcessParams<T>,
    spec: &ExcitationSpec<T>,
) -> Result<Vec<LayerRecord<T>>> {
    spec.validate(process.u_min, process.u_max)?;
    if spec.n_layers > process.n_layers {
        return Err(Error::Config(format!(
            "excitation wants {} layers but the process provides {}",
            spec.n_layers, process.n_layers
        )));
    }
    let per_print: Vec<Vec<LayerRecord<T>>> = (0..spec.n_prints)
        .into_par_iter()
        .map(|p| run_print(material, process, spec, p))
        .collect::<Result<_>>()?;
    Ok(per_print.into_iter().flatten().collect())
}

// --- dataset file (CSV, schema versioned) ---

pub const DATASET_SCHEMA: &str = "dataset/1";
const DATASET_HEADER: &str = "print,layer,theta_k,i,u_w,depth_m,length_m";

/// Serialize records to the dataset CSV format.
pub fn dataset_to_csv<T: Real>(records: &[LayerRecord<T>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# schema: {DATASET_SCHEMA}\n"));
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for r in records {
        for (i, (u, s)) in r.inputs.iter().zip(&r.states).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.print_id, r.layer_id, r.theta, i, u, s.depth, s.length
            ));
        }
    }
    out
}

pub fn save_dataset<T: Real>(records: &[LayerRecord<T>], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(dataset_to_csv(records).as_bytes())?;
    Ok(())
}

/// Parse the dataset CSV, validating schema, header, and per-record
/// contiguity of the interval index.
pub fn load_dataset<T: Real>(path: &Path) -> Result<Vec<LayerRecord<T>>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text)
}

pub fn parse_dataset<T: Real>(text: &str) -> Result<Vec<LayerRecord<T>>> {
    let mut records: Vec<LayerRecord<T>> = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in text.lines().enumerate() {
        let line_id = lineno + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != DATASET_HEADER {
                return Err(Error::Parse(format!(
                    "line {line_id}: expected header '{DATASET_HEADER}'"
                )));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "line {line_id}: expected 7 fields, got {}",
                fields.len()
            )));
        }
        let parse_usize = |s: &str, name: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {line_id}: bad {name} '{s}'")))
        };
        let parse_t = |s: &str, name: &str| -> Result<T> {
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line_id}: bad {name} '{s}'")))?;
            Ok(real::<T>(v))
        };
        let print_id = parse_usize(fields[0], "print")?;
        let layer_id = parse_usize(fields[1], "layer")?;
        let theta = parse_t(fields[2], "theta_k")?;
        let i = parse_usize(fields[3], "i")?;
        let u = parse_t(fields[4], "u_w")?;
        let depth = parse_t(fields[5], "depth_m")?;
        let length = parse_t(fields[6], "length_m")?;

        let start_new = match records.last() {
            Some(r) => r.print_id != print_id || r.layer_id != layer_id,
            None => true,
        };
        if start_new {
            if i != 0 {
                return Err(Error::Parse(format!(
                    "line {line_id}: record ({print_id},{layer_id}) does not start at i=0"
                )));
            }
            records.push(LayerRecord {
                print_id,
                layer_id,
                theta,
                inputs: Vec::new(),
                states: Vec::new(),
            });
        }
        let rec = records.last_mut().unwrap();
        if i != rec.inputs.len() {
            return Err(Error::Parse(format!(
                "line {line_id}: non-contiguous interval index {i}"
            )));
        }
        if rec.theta != theta {
            return Err(Error::Parse(format!(
                "line {line_id}: theta changed within record ({print_id},{layer_id})"
            )));
        }
        rec.inputs.push(u);
        rec.states.push(MeltPoolState { depth, length });
    }
    if !header_seen {
        return Err(Error::Parse("dataset file has no header".to_string()));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_setup() -> (MaterialProps<f64>, ProcessParams<f64>, ExcitationSpec<f64>) {
        let m = MaterialProps::stainless_304l();
        let mut p = ProcessParams::nominal();
        p.track_length = 3.5e-4;
        p.substrate_height = 4.9e-5;
        p.layer_thickness = 1.4e-5;
        p.n_layers = 2;
        p.n_intervals = 8;
        let mut spec = ExcitationSpec::nominal(11);
        spec.n_prints = 2;
        spec.n_layers = 2;
        (m, p, spec)
    }

    #[test]
    fn campaign_yields_prints_times_layers_records() {
        let (m, p, spec) = tiny_setup();
        let d = collect_dataset(&m, &p, &spec).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d[0].print_id, 0);
        assert_eq!(d[3].layer_id, 1);
        for r in &d {
            assert_eq!(r.inputs.len(), 8);
            assert_eq!(r.states.len(), 8);
        }
    }

    #[test]
    fn first_layer_theta_is_ambient() {
        let (m, p, mut spec) = tiny_setup();
        spec.n_prints = 1;
        spec.n_layers = 1;
        let d = collect_dataset(&m, &p, &spec).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].theta, m.t_ambient);
    }

    #[test]
    fn later_layer_theta_exceeds_ambient() {
        let (m, p, spec) = tiny_setup();
        let d = collect_dataset(&m, &p, &spec).unwrap();
        assert!(d[1].theta > m.t_ambient, "theta {}", d[1].theta);
    }

    #[test]
    fn dataset_csv_round_trips() {
        let (m, p, spec) = tiny_setup();
        let d = collect_dataset(&m, &p, &spec).unwrap();
        let text = dataset_to_csv(&d);
        let back = parse_dataset::<f64>(&text).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn campaign_is_deterministic() {
        let (m, p, spec) = tiny_setup();
        let a = dataset_to_csv(&collect_dataset(&m, &p, &spec).unwrap());
        let b = dataset_to_csv(&collect_dataset(&m, &p, &spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let bad = "# schema: dataset/1\nprint,layer,theta_k,i,u_w,depth_m,length_m\n0,0,293,0,100,0,0\n0,0,293,2,100,0,0\n";
        let err = parse_dataset::<f64>(bad).unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 4"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
