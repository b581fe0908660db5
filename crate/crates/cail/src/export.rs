//! Template export as Graphviz DOT (one digraph per template) and JSON.
//!
//! Entry `[j, k]` of a template is the edge `j → k`. Nodes are named
//! `s1..sn` for states and `a1..ak` for actions. An edge is exported when it
//! is off-diagonal, nonzero and `|w| ≥ threshold`; its `penwidth` is
//! `PENWIDTH_PER_UNIT · |w|`.

use std::fmt::Write as _;

use cail_core::diff::Matrix;
use serde::Serialize;

use crate::error::Error;
use crate::json;

pub const PENWIDTH_PER_UNIT: f64 = 10.0;

pub fn node_names(n_state: usize, n_action: usize) -> Vec<String> {
    (1..=n_state).map(|i| format!("s{i}")).chain((1..=n_action).map(|i| format!("a{i}"))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

pub fn edges(template: &Matrix, threshold: f64) -> Vec<Edge> {
    let mut out = Vec::new();
    for from in 0..template.rows() {
        for to in 0..template.cols() {
            let weight = template.get(from, to);
            if from != to && weight != 0.0 && weight.abs() >= threshold {
                out.push(Edge { from, to, weight });
            }
        }
    }
    out
}

pub fn to_dot(index: usize, template: &Matrix, names: &[String], threshold: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph template_{index} {{");
    let _ = writeln!(s, "  rankdir=LR;");
    for name in names {
        let shape = if name.starts_with('a') { "box" } else { "ellipse" };
        let _ = writeln!(s, "  {name} [shape={shape}];");
    }
    for e in edges(template, threshold) {
        let _ = writeln!(
            s,
            "  {} -> {} [penwidth={:.4}, label=\"{:.3}\"];",
            names[e.from],
            names[e.to],
            PENWIDTH_PER_UNIT * e.weight.abs(),
            e.weight
        );
    }
    s.push_str("}\n");
    s
}

#[derive(Serialize)]
struct TemplateJson {
    index: usize,
    weights: Vec<Vec<f64>>,
    edges: Vec<Edge>,
}

#[derive(Serialize)]
struct ExportJson<'a> {
    nodes: &'a [String],
    threshold: f64,
    templates: Vec<TemplateJson>,
}

pub fn to_json(templates: &[Matrix], names: &[String], threshold: f64) -> Result<Vec<u8>, Error> {
    let templates = templates
        .iter()
        .enumerate()
        .map(|(index, t)| TemplateJson {
            index,
            weights: (0..t.rows()).map(|r| t.row(r).to_vec()).collect(),
            edges: edges(t, threshold),
        })
        .collect();
    Ok(json::to_pretty(&ExportJson { nodes: names, threshold, templates })?)
}

/// `(file name, contents)` for every export file.
pub fn render(templates: &[Matrix], n_state: usize, n_action: usize, threshold: f64) -> Result<Vec<(String, Vec<u8>)>, Error> {
    let names = node_names(n_state, n_action);
    let mut files: Vec<(String, Vec<u8>)> = templates
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("template_{i}.dot"), to_dot(i, t, &names, threshold).into_bytes()))
        .collect();
    files.push((String::from("templates.json"), to_json(templates, &names, threshold)?));
    Ok(files)
}
