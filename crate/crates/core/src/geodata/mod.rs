//! Road network: city description, directed road graph, routing and the
//! bearing primitive used by the shuttles' acceptance filter.

mod city;
mod geometry;
mod graph;
mod routing;

pub use city::{
    generate_grid_city, load_city, load_city_file, Building, BuildingCategory, CityModel,
    Intersection, IntersectionKind, RoadSpec,
};
pub use geometry::{bearing_angle, polyline_length, Point};
pub use graph::{build_road_graph, Edge, EdgeIx, GraphNode, NodeIx, RoadGraph};
pub use routing::{path_travel_time, shortest_path, shortest_path_avoiding, Path};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("malformed city document at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("feature {feature}: {message}")]
    Feature { feature: String, message: String },
    #[error("road {road} references missing intersection {intersection}")]
    MissingIntersection { road: String, intersection: u64 },
    #[error("city has no roads")]
    EmptyCity,
    #[error("city needs at least 2 intersections, found {0}")]
    TooFewIntersections(usize),
    #[error("largest strongly connected component has {0} node(s)")]
    DegenerateGraph(usize),
    #[error("unknown node {0}")]
    UnknownNode(u64),
    #[error("bearing undefined: position coincides with the final target")]
    UndefinedBearing,
    #[error("invalid grid parameters: {0}")]
    InvalidGrid(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}
