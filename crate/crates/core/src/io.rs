//! CSV readers and writers for line instances, planar point sets and
//! assignments.
//!
//! Line instances use one row per point: `role,location,capacity` with role
//! `user` or `server` (capacity is blank for users). Planar point sets use
//! `role,x,y`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::embed::{PlanarInstance, Point};
use crate::error::{invalid, Result};
use crate::spatial::SpatialInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PointRole {
    User,
    Server,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRow {
    role: PointRole,
    location: f64,
    capacity: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlaneRow {
    role: PointRole,
    x: f64,
    y: f64,
}

/// Reads a line instance. Rows may come in any order; locations are sorted
/// (servers keep their capacity). A missing server capacity defaults to
/// `default_capacity`.
pub fn read_instance<R: Read>(reader: R, default_capacity: u32) -> Result<SpatialInstance> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut users = Vec::new();
    let mut servers: Vec<(f64, u32)> = Vec::new();
    for (line, row) in rdr.deserialize::<LineRow>().enumerate() {
        let row = row?;
        if !row.location.is_finite() {
            return Err(invalid(format!("row {}: location must be finite", line + 1)));
        }
        match row.role {
            PointRole::User => users.push(row.location),
            PointRole::Server => servers.push((row.location, row.capacity.unwrap_or(default_capacity))),
        }
    }
    users.sort_by(f64::total_cmp);
    servers.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (locs, caps) = servers.into_iter().unzip();
    SpatialInstance::new(users, locs, caps)
}

pub fn write_instance<W: Write>(writer: W, instance: &SpatialInstance) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for &u in instance.users() {
        w.serialize(LineRow { role: PointRole::User, location: u, capacity: None })?;
    }
    for (&s, &c) in instance.servers().iter().zip(instance.capacities()) {
        w.serialize(LineRow { role: PointRole::Server, location: s, capacity: Some(c) })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads planar points in file order (users and servers numbered separately).
pub fn read_points<R: Read>(reader: R) -> Result<PlanarInstance> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut users: Vec<Point> = Vec::new();
    let mut servers: Vec<Point> = Vec::new();
    for row in rdr.deserialize::<PlaneRow>() {
        let row = row?;
        match row.role {
            PointRole::User => users.push([row.x, row.y]),
            PointRole::Server => servers.push([row.x, row.y]),
        }
    }
    PlanarInstance::new(users, servers)
}

pub fn write_points<W: Write>(writer: W, instance: &PlanarInstance) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in instance.users() {
        w.serialize(PlaneRow { role: PointRole::User, x: p[0], y: p[1] })?;
    }
    for p in instance.servers() {
        w.serialize(PlaneRow { role: PointRole::Server, x: p[0], y: p[1] })?;
    }
    w.flush()?;
    Ok(())
}

/// Header of an assignment table.
pub const ASSIGNMENT_HEADER: [&str; 3] = ["user_idx", "server_idx", "distance"];

/// `user_idx,server_idx,distance` records (blank server and distance for
/// unmatched users) followed by a `summary` record whose `server_idx` holds
/// the matched count and `distance` the mean distance.
pub fn assignment_records(assignment: &[Option<usize>], distances: &[Option<f64>]) -> Result<Vec<[String; 3]>> {
    if assignment.len() != distances.len() {
        return Err(invalid("assignment and distance lists differ in length"));
    }
    let mut out = Vec::with_capacity(assignment.len() + 1);
    let mut total = 0.0;
    let mut matched = 0usize;
    for (i, (s, d)) in assignment.iter().zip(distances).enumerate() {
        if let Some(x) = d {
            total += x;
            matched += 1;
        }
        out.push([
            i.to_string(),
            s.map(|j| j.to_string()).unwrap_or_default(),
            d.map(|x| x.to_string()).unwrap_or_default(),
        ]);
    }
    let mean = if matched > 0 { total / matched as f64 } else { f64::NAN };
    out.push(["summary".to_string(), matched.to_string(), mean.to_string()]);
    Ok(out)
}

pub fn write_assignment<W: Write>(writer: W, assignment: &[Option<usize>], distances: &[Option<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ASSIGNMENT_HEADER)?;
    for rec in assignment_records(assignment, distances)? {
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let inst = SpatialInstance::new(vec![0.5, 2.0], vec![1.0, 3.0], vec![2, 1]).unwrap();
        let mut buf = Vec::new();
        write_instance(&mut buf, &inst).unwrap();
        assert_eq!(read_instance(buf.as_slice(), 1).unwrap(), inst);
    }

    #[test]
    fn unsorted_rows_and_default_capacity() {
        let text = "role,location,capacity\nserver,4,\nuser,3,\nuser,1,\nserver,2,3\n";
        let inst = read_instance(text.as_bytes(), 5).unwrap();
        assert_eq!(inst.users(), &[1.0, 3.0]);
        assert_eq!(inst.servers(), &[2.0, 4.0]);
        assert_eq!(inst.capacities(), &[3, 5]);
    }

    #[test]
    fn bad_role_rejected() {
        assert!(read_instance("role,location,capacity\nrouter,1,\n".as_bytes(), 1).is_err());
    }

    #[test]
    fn planar_round_trip() {
        let inst = PlanarInstance::new(vec![[0.1, 0.2]], vec![[0.3, 0.4], [0.5, 0.6]]).unwrap();
        let mut buf = Vec::new();
        write_points(&mut buf, &inst).unwrap();
        assert_eq!(read_points(buf.as_slice()).unwrap(), inst);
    }

    #[test]
    fn assignment_with_summary() {
        let mut buf = Vec::new();
        write_assignment(&mut buf, &[Some(1), None], &[Some(0.5), None]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "user_idx,server_idx,distance\n0,1,0.5\n1,,\nsummary,1,0.5\n");
    }
}
