use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::geometry::{polyline_length, Point};
use super::GeoError;
use crate::Scalar;

const EARTH_RADIUS_M: f64 = 6_371_008.8;
const DEFAULT_MAX_SPEED: f64 = 50.0 / 3.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionKind {
    Plain,
    Signal,
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingCategory {
    Residential,
    Industrial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intersection<S> {
    pub id: u64,
    pub pos: Point<S>,
    pub kind: IntersectionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec<S> {
    pub id: u64,
    pub from: u64,
    pub to: u64,
    pub polyline: Vec<Point<S>>,
    pub lanes: u32,
    /// Free-flow speed in m/s.
    pub max_speed: S,
    pub oneway: bool,
}

impl<S: Scalar> RoadSpec<S> {
    pub fn length(&self) -> S {
        polyline_length(&self.polyline)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Building<S> {
    pub id: u64,
    pub centroid: Point<S>,
    pub category: BuildingCategory,
}

/// City description in planar meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CityModel<S> {
    pub intersections: Vec<Intersection<S>>,
    pub roads: Vec<RoadSpec<S>>,
    pub buildings: Vec<Building<S>>,
    /// Features without a recognised `kind` tag that the loader ignored.
    #[serde(skip)]
    pub skipped_features: usize,
}

impl<S: Scalar> CityModel<S> {
    /// City of plain intersections joined by straight two-way single-lane
    /// roads, without buildings. Road ids follow the order of `roads`.
    pub fn from_segments(nodes: &[(u64, Point<S>)], roads: &[(u64, u64)], max_speed: S) -> Self {
        let at = |id: u64| {
            nodes
                .iter()
                .find(|(n, _)| *n == id)
                .map(|(_, p)| *p)
                .unwrap_or(Point::new(S::nan(), S::nan()))
        };
        Self {
            intersections: nodes
                .iter()
                .map(|(id, pos)| Intersection {
                    id: *id,
                    pos: *pos,
                    kind: IntersectionKind::Plain,
                })
                .collect(),
            roads: roads
                .iter()
                .enumerate()
                .map(|(i, (from, to))| RoadSpec {
                    id: i as u64,
                    from: *from,
                    to: *to,
                    polyline: vec![at(*from), at(*to)],
                    lanes: 1,
                    max_speed,
                    oneway: false,
                })
                .collect(),
            buildings: Vec::new(),
            skipped_features: 0,
        }
    }

    /// Checks the structural invariants: enough intersections, at least one
    /// road, resolvable road endpoints and finite coordinates.
    pub fn validate(&self) -> Result<(), GeoError> {
        if self.roads.is_empty() {
            return Err(GeoError::EmptyCity);
        }
        if self.intersections.len() < 2 {
            return Err(GeoError::TooFewIntersections(self.intersections.len()));
        }
        let mut ids = BTreeSet::new();
        for node in &self.intersections {
            if !ids.insert(node.id) {
                return Err(feature_err(
                    format!("intersection {}", node.id),
                    "duplicate intersection id",
                ));
            }
            if !node.pos.is_finite() {
                return Err(feature_err(
                    format!("intersection {}", node.id),
                    "non-finite coordinate",
                ));
            }
        }
        for road in &self.roads {
            for end in [road.from, road.to] {
                if !ids.contains(&end) {
                    return Err(GeoError::MissingIntersection {
                        road: road.id.to_string(),
                        intersection: end,
                    });
                }
            }
            let name = format!("road {}", road.id);
            if road.polyline.len() < 2 || road.polyline.iter().any(|p| !p.is_finite()) {
                return Err(feature_err(name, "polyline needs at least 2 finite points"));
            }
            if road.length() <= S::zero() {
                return Err(feature_err(name, "road has zero length"));
            }
            if road.from == road.to {
                return Err(feature_err(name, "road starts and ends at the same intersection"));
            }
            if road.lanes == 0 || !(road.max_speed > S::zero()) || !road.max_speed.is_finite() {
                return Err(feature_err(name, "lanes must be >= 1 and max_speed > 0"));
            }
        }
        for b in &self.buildings {
            if !b.centroid.is_finite() {
                return Err(feature_err(format!("building {}", b.id), "non-finite centroid"));
            }
        }
        Ok(())
    }

    /// Canonical text dump used for golden comparisons.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("city model serializes")
    }

    /// GeoJSON `FeatureCollection` in the layout [`load_city`] reads back.
    pub fn to_geojson(&self) -> Value {
        let mut features = Vec::new();
        for node in &self.intersections {
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [node.pos.x.as_f64(), node.pos.y.as_f64()]},
                "properties": {"kind": "intersection", "id": node.id, "control": node.kind},
            }));
        }
        for road in &self.roads {
            let coords: Vec<[f64; 2]> = road
                .polyline
                .iter()
                .map(|p| [p.x.as_f64(), p.y.as_f64()])
                .collect();
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {
                    "kind": "road", "id": road.id, "from": road.from, "to": road.to,
                    "lanes": road.lanes, "max_speed": road.max_speed.as_f64(), "oneway": road.oneway,
                },
            }));
        }
        for b in &self.buildings {
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [b.centroid.x.as_f64(), b.centroid.y.as_f64()]},
                "properties": {"kind": "building", "id": b.id, "category": b.category},
            }));
        }
        json!({"type": "FeatureCollection", "coordinates": "planar", "features": features})
    }
}

fn feature_err(feature: impl Into<String>, message: impl Into<String>) -> GeoError {
    GeoError::Feature {
        feature: feature.into(),
        message: message.into(),
    }
}

pub fn load_city_file<S: Scalar>(path: &std::path::Path) -> Result<CityModel<S>, GeoError> {
    let text = std::fs::read_to_string(path).map_err(|e| GeoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_city(&text)
}

enum Raw {
    Node {
        id: u64,
        at: [f64; 2],
        kind: IntersectionKind,
    },
    Road {
        id: u64,
        from: u64,
        to: u64,
        line: Vec<[f64; 2]>,
        lanes: u32,
        max_speed: f64,
        oneway: bool,
    },
    Building {
        id: u64,
        at: [f64; 2],
        category: BuildingCategory,
    },
}

/// Parses a GeoJSON `FeatureCollection` whose features carry a `kind`
/// property of `intersection`, `road` or `building`.
///
/// Coordinates are planar meters unless the collection declares
/// `"coordinates": "wgs84"`, in which case `[lon, lat]` pairs are projected
/// with a local equirectangular projection centred on their mean.
pub fn load_city<S: Scalar>(document: &str) -> Result<CityModel<S>, GeoError> {
    let root: Value = serde_json::from_str(document).map_err(|e| GeoError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let top = root
        .as_object()
        .ok_or_else(|| feature_err("document", "top level must be an object"))?;
    if top.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(feature_err("document", "expected a FeatureCollection"));
    }
    let geographic = match top.get("coordinates").and_then(Value::as_str) {
        None | Some("planar") => false,
        Some("wgs84") => true,
        Some(other) => {
            return Err(feature_err(
                "document",
                format!("unknown coordinate mode {other:?}"),
            ))
        }
    };
    let features = top
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| feature_err("document", "missing features array"))?;

    let mut raws = Vec::new();
    let mut skipped = 0;
    for (index, feature) in features.iter().enumerate() {
        let name = feature_name(index, feature);
        match parse_feature(&name, feature)? {
            Some(raw) => raws.push(raw),
            None => skipped += 1,
        }
    }

    let project = projection(geographic, &raws);
    let mut city = CityModel {
        intersections: Vec::new(),
        roads: Vec::new(),
        buildings: Vec::new(),
        skipped_features: skipped,
    };
    let pt = |c: [f64; 2]| {
        let [x, y] = project(c);
        Point::new(S::lit(x), S::lit(y))
    };
    for raw in raws {
        match raw {
            Raw::Node { id, at, kind } => city.intersections.push(Intersection {
                id,
                pos: pt(at),
                kind,
            }),
            Raw::Road {
                id,
                from,
                to,
                line,
                lanes,
                max_speed,
                oneway,
            } => city.roads.push(RoadSpec {
                id,
                from,
                to,
                polyline: line.into_iter().map(pt).collect(),
                lanes,
                max_speed: S::lit(max_speed),
                oneway,
            }),
            Raw::Building { id, at, category } => city.buildings.push(Building {
                id,
                centroid: pt(at),
                category,
            }),
        }
    }
    city.validate()?;
    Ok(city)
}

fn feature_name(index: usize, feature: &Value) -> String {
    let id = feature
        .get("properties")
        .and_then(|p| p.get("id"))
        .or_else(|| feature.get("id"));
    match id {
        Some(id) => format!("#{index} (id {id})"),
        None => format!("#{index}"),
    }
}

fn parse_feature(name: &str, feature: &Value) -> Result<Option<Raw>, GeoError> {
    let err = |m: &str| feature_err(name, m);
    let empty = Map::new();
    let props = feature
        .get("properties")
        .and_then(Value::as_object)
        .unwrap_or(&empty);
    let kind = match props.get("kind").and_then(Value::as_str) {
        Some(k) => k,
        None => return Ok(None),
    };
    let geometry = feature
        .get("geometry")
        .ok_or_else(|| err("missing geometry"))?;
    let gtype = geometry.get("type").and_then(Value::as_str).unwrap_or("");
    let coords = geometry
        .get("coordinates")
        .ok_or_else(|| err("missing coordinates"))?;
    let id = props
        .get("id")
        .and_then(Value::as_u64)
        .ok_or_else(|| err("missing unsigned integer id"))?;

    match kind {
        "intersection" => {
            if gtype != "Point" {
                return Err(err("intersection must be a Point"));
            }
            let kind = match props.get("control").and_then(Value::as_str) {
                None | Some("plain") => IntersectionKind::Plain,
                Some("signal") => IntersectionKind::Signal,
                Some("stop") => IntersectionKind::Stop,
                Some(_) => return Err(err("control must be plain, signal or stop")),
            };
            Ok(Some(Raw::Node {
                id,
                at: coord(coords).ok_or_else(|| err("bad point coordinates"))?,
                kind,
            }))
        }
        "road" => {
            if gtype != "LineString" {
                return Err(err("road must be a LineString"));
            }
            let line = coords
                .as_array()
                .ok_or_else(|| err("bad line coordinates"))?
                .iter()
                .map(coord)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| err("bad line coordinates"))?;
            let end = |key: &str| {
                props
                    .get(key)
                    .and_then(Value::as_u64)
                    .ok_or_else(|| err(&format!("road needs an unsigned `{key}` intersection id")))
            };
            let lanes = match props.get("lanes") {
                None => 1,
                Some(v) => v
                    .as_u64()
                    .and_then(|v| u32::try_from(v).ok())
                    .ok_or_else(|| err("lanes must be an unsigned integer"))?,
            };
            let max_speed = match props.get("max_speed") {
                None => DEFAULT_MAX_SPEED,
                Some(v) => v.as_f64().ok_or_else(|| err("max_speed must be a number"))?,
            };
            let oneway = match props.get("oneway") {
                None => false,
                Some(v) => v.as_bool().ok_or_else(|| err("oneway must be a boolean"))?,
            };
            Ok(Some(Raw::Road {
                id,
                from: end("from")?,
                to: end("to")?,
                line,
                lanes,
                max_speed,
                oneway,
            }))
        }
        "building" => {
            let category = match props.get("category").and_then(Value::as_str) {
                Some("residential") => BuildingCategory::Residential,
                Some("industrial") => BuildingCategory::Industrial,
                _ => return Err(err("building category must be residential or industrial")),
            };
            let at = match gtype {
                "Point" => coord(coords),
                "Polygon" => coords
                    .as_array()
                    .and_then(|rings| rings.first())
                    .and_then(Value::as_array)
                    .and_then(|ring| ring.iter().map(coord).collect::<Option<Vec<_>>>())
                    .and_then(|ring| ring_centroid(&ring)),
                _ => None,
            }
            .ok_or_else(|| err("building must be a Point or Polygon"))?;
            Ok(Some(Raw::Building { id, at, category }))
        }
        _ => Ok(None),
    }
}

fn coord(v: &Value) -> Option<[f64; 2]> {
    let a = v.as_array()?;
    if a.len() < 2 {
        return None;
    }
    let (x, y) = (a[0].as_f64()?, a[1].as_f64()?);
    (x.is_finite() && y.is_finite()).then_some([x, y])
}

fn ring_centroid(ring: &[[f64; 2]]) -> Option<[f64; 2]> {
    if ring.is_empty() {
        return None;
    }
    let (mut area, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for w in ring.windows(2) {
        let cross = w[0][0] * w[1][1] - w[1][0] * w[0][1];
        area += cross;
        cx += (w[0][0] + w[1][0]) * cross;
        cy += (w[0][1] + w[1][1]) * cross;
    }
    if area.abs() < 1e-12 {
        let n = ring.len() as f64;
        let sx: f64 = ring.iter().map(|p| p[0]).sum();
        let sy: f64 = ring.iter().map(|p| p[1]).sum();
        return Some([sx / n, sy / n]);
    }
    Some([cx / (3.0 * area), cy / (3.0 * area)])
}

fn projection(geographic: bool, raws: &[Raw]) -> impl Fn([f64; 2]) -> [f64; 2] {
    let (mut lon0, mut lat0) = (0.0, 0.0);
    if geographic {
        let mut all = Vec::new();
        for raw in raws {
            match raw {
                Raw::Node { at, .. } | Raw::Building { at, .. } => all.push(*at),
                Raw::Road { line, .. } => all.extend_from_slice(line),
            }
        }
        if !all.is_empty() {
            let n = all.len() as f64;
            lon0 = all.iter().map(|c| c[0]).sum::<f64>() / n;
            lat0 = all.iter().map(|c| c[1]).sum::<f64>() / n;
        }
    }
    move |[a, b]: [f64; 2]| {
        if geographic {
            let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
            [k * (a - lon0) * lat0.to_radians().cos(), k * (b - lat0)]
        } else {
            [a, b]
        }
    }
}

/// Lattice city: `rows × cols` intersections spaced `block_m` apart, two-way
/// roads along every lattice line, and one residential plus one industrial
/// building per block at seeded positions.
pub fn generate_grid_city<S: Scalar>(
    rows: usize,
    cols: usize,
    block_m: S,
    seed: u64,
) -> Result<CityModel<S>, GeoError> {
    if rows < 2 || cols < 2 {
        return Err(GeoError::InvalidGrid(format!(
            "rows and cols must be >= 2, got {rows}x{cols}"
        )));
    }
    if !(block_m > S::zero()) || !block_m.is_finite() {
        return Err(GeoError::InvalidGrid("block size must be positive".into()));
    }
    let node_id = |r: usize, c: usize| (r * cols + c) as u64;
    let at = |r: usize, c: usize| {
        Point::new(
            block_m * S::lit(c as f64),
            block_m * S::lit(r as f64),
        )
    };

    let mut intersections = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            intersections.push(Intersection {
                id: node_id(r, c),
                pos: at(r, c),
                kind: IntersectionKind::Plain,
            });
        }
    }

    let mut roads = Vec::new();
    let mut road = |a: (usize, usize), b: (usize, usize)| {
        let id = roads.len() as u64;
        roads.push(RoadSpec {
            id,
            from: node_id(a.0, a.1),
            to: node_id(b.0, b.1),
            polyline: vec![at(a.0, a.1), at(b.0, b.1)],
            lanes: 1,
            max_speed: S::lit(DEFAULT_MAX_SPEED),
            oneway: false,
        });
    };
    for r in 0..rows {
        for c in 0..cols - 1 {
            road((r, c), (r, c + 1));
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            road((r, c), (r + 1, c));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buildings = Vec::new();
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            for category in [BuildingCategory::Residential, BuildingCategory::Industrial] {
                let u: f64 = rng.gen_range(0.15..0.85);
                let v: f64 = rng.gen_range(0.15..0.85);
                let base = at(r, c);
                buildings.push(Building {
                    id: buildings.len() as u64,
                    centroid: Point::new(base.x + block_m * S::lit(u), base.y + block_m * S::lit(v)),
                    category,
                });
            }
        }
    }

    let city = CityModel {
        intersections,
        roads,
        buildings,
        skipped_features: 0,
    };
    city.validate()?;
    Ok(city)
}
