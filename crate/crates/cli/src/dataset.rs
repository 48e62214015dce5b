use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use flate2::read::GzDecoder;
use seedmin_core::rng::seeded;
use seedmin_core::synth::nethept_like;
use seedmin_core::{fixtures, parse_edge_list, EdgeListOptions, LoadedGraph, Model, Weighting};

/// Loads a dataset path or one of the built-in generators:
/// `fixture:four-node` and `synth:nethept[:<seed>]`.
pub fn load(spec: &str, model: Model, weighting: Weighting, undirected: bool, compact_ids: bool) -> Result<LoadedGraph> {
    if let Some(name) = spec.strip_prefix("fixture:") {
        let graph = match name {
            "four-node" => fixtures::four_node().with_model(model)?,
            other => bail!("unknown fixture '{other}' (available: four-node)"),
        };
        return Ok(LoadedGraph {
            graph,
            original_ids: None,
        });
    }
    if let Some(rest) = spec.strip_prefix("synth:") {
        let (name, seed) = match rest.split_once(':') {
            Some((name, seed)) => (name, seed.parse().with_context(|| format!("invalid generator seed '{seed}'"))?),
            None => (rest, 0),
        };
        if name != "nethept" {
            bail!("unknown generator '{name}' (available: nethept)");
        }
        return Ok(LoadedGraph {
            graph: nethept_like(model, &mut seeded(seed)),
            original_ids: None,
        });
    }
    let path = Path::new(spec);
    let file = File::open(path).with_context(|| format!("cannot open dataset {}", path.display()))?;
    let reader: Box<dyn BufRead> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(BufReader::new(GzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let mut opts = EdgeListOptions::new(weighting, model);
    opts.undirected = undirected;
    opts.compact_ids = compact_ids;
    parse_edge_list(reader, &opts).with_context(|| format!("cannot load dataset {}", path.display()))
}
