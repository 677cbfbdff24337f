//! Request handlers of the HTTP interface as plain functions from query
//! parameters to a status and a JSON body. Every request runs its own query
//! session over the shared structure.

use std::collections::HashMap;

use serde_json::{json, Value};

use crate::commands::{cluster_rows, curve_points};
use crate::persist::Persisted;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: Value,
}

impl ApiResponse {
    fn ok(body: Value) -> Self {
        ApiResponse { status: 200, body }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiResponse {
            status: 400,
            body: json!({ "error": message.into() }),
        }
    }

    pub fn not_found(path: &str) -> Self {
        ApiResponse {
            status: 404,
            body: json!({ "error": format!("no such endpoint {path}") }),
        }
    }
}

pub type Params = HashMap<String, String>;

fn number(params: &Params, name: &str) -> Result<f64, ApiResponse> {
    let raw = params
        .get(name)
        .ok_or_else(|| ApiResponse::bad_request(format!("missing parameter {name}")))?;
    raw.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ApiResponse::bad_request(format!("{name}={raw:?} is not a number")))
}

fn flag(params: &Params, name: &str) -> Result<bool, ApiResponse> {
    match params.get(name).map(String::as_str) {
        None | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") | Some("") => Ok(true),
        Some(other) => Err(ApiResponse::bad_request(format!(
            "{name}={other:?} is not a boolean"
        ))),
    }
}

pub fn meta(p: &Persisted) -> ApiResponse {
    let s = &p.structure;
    let grid = p.grid.as_ref().map(|g| {
        json!({ "dims": g.dims, "connectivity": u8::from(g.connectivity) })
    });
    ApiResponse::ok(json!({
        "m": s.m(),
        "alpha": s.alpha(),
        "h": s.h(),
        "zeta": s.zeta(),
        "edges": p.edges,
        "representatives": s.representative_count(),
        "admissible": s.admissible().len(),
        "sigma": s.bounds().sigma(),
        "grid": grid,
    }))
}

pub fn clusters(p: &Persisted, params: &Params) -> ApiResponse {
    let run = || -> Result<Value, ApiResponse> {
        let gamma = number(params, "gamma")?;
        let members = flag(params, "members")?;
        let rows = cluster_rows(p, gamma, members)
            .map_err(|e| ApiResponse::bad_request(e.to_string()))?;
        Ok(serde_json::to_value(rows).expect("rows serialise"))
    };
    run().map_or_else(|e| e, ApiResponse::ok)
}

/// Per-vertex maximum threshold. Grid inputs get a full voxel array with
/// `null` outside the mask.
pub fn gamma_map(p: &Persisted) -> ApiResponse {
    let by_vertex = p.structure.gamma_map_by_vertex();
    match (&p.grid, p.voxel_of_vertex()) {
        (Some(grid), Some(voxels)) => {
            let mut values = vec![Value::Null; grid.voxel_count()];
            for (v, &g) in by_vertex.iter().enumerate() {
                values[voxels[v]] = json!(g);
            }
            ApiResponse::ok(json!({ "kind": "grid", "dims": grid.dims, "values": values }))
        }
        _ => ApiResponse::ok(json!({ "kind": "graph", "values": by_vertex })),
    }
}

pub fn curve(p: &Persisted, params: &Params) -> ApiResponse {
    let run = || -> Result<Value, ApiResponse> {
        let from = number(params, "from")?;
        let to = number(params, "to")?;
        let step = number(params, "step")?;
        let points = curve_points(p, from, to, step)
            .map_err(|e| ApiResponse::bad_request(e.to_string()))?;
        Ok(serde_json::to_value(points).expect("points serialise"))
    };
    run().map_or_else(|e| e, ApiResponse::ok)
}
