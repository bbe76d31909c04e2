use serde::{Deserialize, Serialize};

use super::graph::{MetricMode, SphericalGraph, UserPoint};
use super::{ConeSpace, Space};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDescription {
    pub a: usize,
    pub b: usize,
    pub len: f64,
}

/// JSON description of a model space, e.g. `{"type":"circle","length":6.7832}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceDescription {
    Circle {
        length: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metric_mode: Option<MetricMode>,
    },
    Suspension {
        arcs: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metric_mode: Option<MetricMode>,
    },
    Graph {
        vertices: Vec<usize>,
        edges: Vec<EdgeDescription>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metric_mode: Option<MetricMode>,
    },
    Cone {
        base: Box<SpaceDescription>,
    },
}

impl SpaceDescription {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Builds the space without checking the CAT(1) invariants.
    pub fn build(&self) -> Result<Space> {
        match self {
            SpaceDescription::Cone { base } => match base.build()? {
                Space::Graph(g) => Ok(Space::Cone(ConeSpace::new(g))),
                Space::Cone(_) => Err(Error::Parse("cones over cones are not supported".into())),
            },
            other => other.build_graph().map(Space::Graph),
        }
    }

    fn build_graph(&self) -> Result<SphericalGraph> {
        let (graph, mode) = match self {
            SpaceDescription::Circle { length, metric_mode } => (SphericalGraph::circle(*length)?, *metric_mode),
            SpaceDescription::Suspension { arcs, metric_mode } => {
                if *arcs == 0 {
                    return Err(Error::Parse("suspension needs at least one arc".into()));
                }
                (SphericalGraph::suspension(*arcs)?, *metric_mode)
            }
            SpaceDescription::Graph { vertices, edges, metric_mode } => {
                let mut ids = vertices.clone();
                ids.sort_unstable();
                if ids.iter().enumerate().any(|(i, &v)| i != v) {
                    return Err(Error::Parse("vertex ids must be 0..n-1 without repeats".into()));
                }
                let edges: Vec<_> = edges.iter().map(|e| (e.a, e.b, e.len)).collect();
                (SphericalGraph::from_edges(vertices.len(), &edges, MetricMode::PiTruncated)?, *metric_mode)
            }
            SpaceDescription::Cone { .. } => unreachable!("handled by build"),
        };
        Ok(graph.with_mode(mode.unwrap_or_default()))
    }
}

/// JSON form of a cone point: a base point plus `radius`. `{"radius":0}`
/// is the apex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConePointDescription {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    pub radius: f64,
}

impl ConePointDescription {
    pub fn new(base: UserPoint, radius: f64) -> Self {
        match base {
            UserPoint::Vertex { vertex } => Self { vertex: Some(vertex), edge: None, offset: None, radius },
            UserPoint::Edge { edge, offset } => Self { vertex: None, edge: Some(edge), offset: Some(offset), radius },
        }
    }

    pub fn base(&self) -> Result<UserPoint> {
        match (self.vertex, self.edge, self.offset) {
            (Some(vertex), None, None) => Ok(UserPoint::Vertex { vertex }),
            (None, Some(edge), Some(offset)) => Ok(UserPoint::Edge { edge, offset }),
            _ => Err(Error::Parse("cone point needs either \"vertex\" or \"edge\"+\"offset\"".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        for text in [
            r#"{"type":"circle","length":6.7832}"#,
            r#"{"type":"suspension","arcs":3}"#,
            r#"{"type":"graph","vertices":[0,1],"edges":[{"a":0,"b":1,"len":3.1416},{"a":1,"b":0,"len":3.1416}]}"#,
            r#"{"type":"cone","base":{"type":"circle","length":6.2832,"metric_mode":"intrinsic"}}"#,
        ] {
            SpaceDescription::parse(text).unwrap().build().unwrap();
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(SpaceDescription::parse("{\"type\":\"torus\"}"), Err(Error::Parse(_))));
        assert!(matches!(SpaceDescription::parse("not json"), Err(Error::Parse(_))));
        let bad_ids = SpaceDescription::parse(r#"{"type":"graph","vertices":[0,2],"edges":[]}"#).unwrap();
        assert!(bad_ids.build().is_err());
        let bad_len = SpaceDescription::parse(r#"{"type":"circle","length":-1}"#).unwrap();
        assert!(matches!(bad_len.build(), Err(Error::Validation(_))));
    }

    #[test]
    fn point_json() {
        let p: UserPoint = serde_json::from_str(r#"{"edge":2,"offset":1.25}"#).unwrap();
        assert_eq!(p, UserPoint::Edge { edge: 2, offset: 1.25 });
        let v: UserPoint = serde_json::from_str(r#"{"vertex":0}"#).unwrap();
        assert_eq!(v, UserPoint::Vertex { vertex: 0 });
        let c: ConePointDescription = serde_json::from_str(r#"{"edge":0,"offset":2.2,"radius":1}"#).unwrap();
        assert_eq!(c.base().unwrap(), UserPoint::Edge { edge: 0, offset: 2.2 });
        let apex: ConePointDescription = serde_json::from_str(r#"{"radius":0}"#).unwrap();
        assert!(apex.base().is_err());
    }
}
