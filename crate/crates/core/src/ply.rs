//! Binary little-endian PLY interchange.
//!
//! The vertex layout is the one used by the Gaussian-splatting ecosystem
//! (`x y z nx ny nz f_dc_* f_rest_* opacity scale_* rot_*`) extended with
//! `skew_0..2`, `dir_0..2` and `opacity2`. Files without the extension load
//! with zero skew, zero boundary direction and `opacity2 = opacity`.
//!
//! Scalars are written as `float` for `f32` scenes and `double` for `f64`
//! scenes so that a save/load round trip is bit-exact at either width. The
//! background color travels in a `comment background r g b` header line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, PlyError, Result};
use crate::scalar::Real;
use crate::scene::{sh_coeff_count, Scene, SkewGaussian};
use crate::sh::MAX_SH_DEGREE;

const MANDATORY: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    F32,
    F64,
    Other(usize),
}

impl Kind {
    fn parse(ty: &str) -> Option<Kind> {
        Some(match ty {
            "float" | "float32" => Kind::F32,
            "double" | "float64" => Kind::F64,
            "char" | "uchar" | "int8" | "uint8" => Kind::Other(1),
            "short" | "ushort" | "int16" | "uint16" => Kind::Other(2),
            "int" | "uint" | "int32" | "uint32" => Kind::Other(4),
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Kind::F32 => 4,
            Kind::F64 => 8,
            Kind::Other(n) => n,
        }
    }
}

struct Property {
    name: String,
    kind: Kind,
    ty: String,
    offset: usize,
}

struct Header {
    count: usize,
    properties: Vec<Property>,
    stride: usize,
    background: Option<[f64; 3]>,
}

fn read_header(reader: &mut impl BufRead) -> Result<Header> {
    let mut line = String::new();
    let mut next_line = |reader: &mut dyn BufRead| -> Result<Option<String>> {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| PlyError::MalformedHeader(e.to_string()))?;
        if n == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
    };

    if next_line(reader)?.as_deref() != Some("ply") {
        return Err(PlyError::NotPly.into());
    }
    let mut count = None;
    let mut in_vertex = false;
    let mut seen_element = false;
    let mut properties: Vec<Property> = Vec::new();
    let mut stride = 0;
    let mut background = None;
    let mut format_ok = false;
    loop {
        let Some(l) = next_line(reader)? else {
            return Err(PlyError::MalformedHeader("missing end_header".into()).into());
        };
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, version] => {
                if *fmt != "binary_little_endian" || *version != "1.0" {
                    return Err(PlyError::UnsupportedFormat(format!("{fmt} {version}")).into());
                }
                format_ok = true;
            }
            ["format", ..] => return Err(PlyError::MalformedHeader(l.clone()).into()),
            ["comment", "background", r, g, b] => {
                let p = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| PlyError::MalformedHeader(format!("bad background `{l}`")))
                };
                background = Some([p(r)?, p(g)?, p(b)?]);
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, n] => {
                if *name == "vertex" {
                    if seen_element {
                        return Err(PlyError::MalformedHeader(
                            "vertex must be the first element".into(),
                        )
                        .into());
                    }
                    let n = n
                        .parse::<usize>()
                        .map_err(|_| PlyError::MalformedHeader(format!("bad vertex count `{n}`")))?;
                    count = Some(n);
                    in_vertex = true;
                } else {
                    in_vertex = false;
                }
                seen_element = true;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(PlyError::MalformedHeader("list properties on vertex".into()).into())
            }
            ["property", ty, name] => {
                if !in_vertex {
                    continue;
                }
                let kind = Kind::parse(ty).ok_or_else(|| PlyError::UnsupportedPropertyType {
                    property: name.to_string(),
                    ty: ty.to_string(),
                })?;
                properties.push(Property {
                    name: name.to_string(),
                    kind,
                    ty: ty.to_string(),
                    offset: stride,
                });
                stride += kind.size();
            }
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(PlyError::MalformedHeader(format!("unexpected line `{l}`")).into()),
        }
    }
    if !format_ok {
        return Err(PlyError::MalformedHeader("missing format line".into()).into());
    }
    let count = count.ok_or_else(|| PlyError::MalformedHeader("no vertex element".into()))?;
    Ok(Header { count, properties, stride, background })
}

/// Reads a scene from a binary PLY stream.
pub fn read_ply<T: Real>(reader: impl Read) -> Result<Scene<T>> {
    let mut reader = BufReader::new(reader);
    let header = read_header(&mut reader)?;
    let by_name: HashMap<&str, &Property> =
        header.properties.iter().map(|p| (p.name.as_str(), p)).collect();
    for name in MANDATORY {
        let p = by_name.get(name).ok_or_else(|| PlyError::MissingField(name.to_string()))?;
        if matches!(p.kind, Kind::Other(_)) {
            return Err(PlyError::UnsupportedPropertyType {
                property: name.to_string(),
                ty: p.ty.clone(),
            }
            .into());
        }
    }
    let n_rest = (0..)
        .take_while(|i| by_name.contains_key(format!("f_rest_{i}").as_str()))
        .count();
    let file_coeffs = n_rest / 3 + 1;
    let file_degree = (file_coeffs as f64).sqrt() as usize - 1;
    if n_rest % 3 != 0 || sh_coeff_count(file_degree) != file_coeffs {
        return Err(PlyError::MalformedHeader(format!("{n_rest} f_rest properties")).into());
    }
    let degree = file_degree.min(MAX_SH_DEGREE);
    let rest_per_channel = file_coeffs - 1;

    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| PlyError::MalformedHeader(e.to_string()))?;
    if payload.len() < header.count * header.stride {
        let vertex = payload.len() / header.stride.max(1);
        let within = payload.len() - vertex * header.stride;
        let field = header
            .properties
            .iter()
            .find(|p| p.offset + p.kind.size() > within)
            .map(|p| p.name.clone())
            .unwrap_or_default();
        return Err(PlyError::Truncated { field, vertex }.into());
    }

    let value = |v: usize, name: &str| -> Option<T> {
        let p = by_name.get(name)?;
        let at = v * header.stride + p.offset;
        let raw = &payload[at..at + p.kind.size()];
        let x = match p.kind {
            Kind::F32 => f32::from_le_bytes(raw.try_into().ok()?) as f64,
            Kind::F64 => f64::from_le_bytes(raw.try_into().ok()?),
            Kind::Other(_) => return None,
        };
        Some(T::lit(x))
    };
    let required = |v: usize, name: &str| value(v, name).unwrap_or_else(T::zero);
    let optional = |v: usize, name: &str| value(v, name).unwrap_or_else(T::zero);

    let mut scene = Scene::new(degree);
    if let Some(bg) = header.background {
        scene.background = [T::lit(bg[0]), T::lit(bg[1]), T::lit(bg[2])];
    }
    scene.primitives.reserve(header.count);
    for v in 0..header.count {
        let mut sh = vec![[T::zero(); 3]; sh_coeff_count(degree)];
        for ch in 0..3 {
            sh[0][ch] = required(v, &format!("f_dc_{ch}"));
            for k in 1..sh.len() {
                sh[k][ch] = optional(v, &format!("f_rest_{}", ch * rest_per_channel + k - 1));
            }
        }
        let o1 = required(v, "opacity");
        scene.primitives.push(SkewGaussian {
            mu: [required(v, "x"), required(v, "y"), required(v, "z")],
            log_scale: [required(v, "scale_0"), required(v, "scale_1"), required(v, "scale_2")],
            rot: [
                required(v, "rot_0"),
                required(v, "rot_1"),
                required(v, "rot_2"),
                required(v, "rot_3"),
            ],
            sh,
            opacity_logits: [o1, value(v, "opacity2").unwrap_or(o1)],
            beta: [optional(v, "skew_0"), optional(v, "skew_1"), optional(v, "skew_2")],
            dir: [optional(v, "dir_0"), optional(v, "dir_1"), optional(v, "dir_2")],
        });
    }
    Ok(scene)
}

/// Writes `scene` as binary PLY with the extended skew layout.
pub fn write_ply<T: Real>(scene: &Scene<T>, writer: impl Write) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    let wide = std::mem::size_of::<T>() > 4;
    let ty = if wide { "double" } else { "float" };
    let coeffs = sh_coeff_count(scene.sh_degree);
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3 * (coeffs - 1)).map(|i| format!("f_rest_{i}")));
    names.extend(
        [
            "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
            "skew_0", "skew_1", "skew_2", "dir_0", "dir_1", "dir_2", "opacity2",
        ]
        .iter()
        .map(|s| s.to_string()),
    );

    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    let bg = scene.background.map(|c| c.to_f64_lossy());
    writeln!(w, "comment background {:?} {:?} {:?}", bg[0], bg[1], bg[2])?;
    writeln!(w, "element vertex {}", scene.primitives.len())?;
    for n in &names {
        writeln!(w, "property {ty} {n}")?;
    }
    writeln!(w, "end_header")?;

    let put = |w: &mut BufWriter<_>, v: T| -> std::io::Result<()> {
        let x = v.to_f64_lossy();
        if wide {
            w.write_all(&x.to_le_bytes())
        } else {
            w.write_all(&(x as f32).to_le_bytes())
        }
    };
    for g in &scene.primitives {
        for v in g.mu {
            put(&mut w, v)?;
        }
        for _ in 0..3 {
            put(&mut w, T::zero())?;
        }
        for ch in 0..3 {
            put(&mut w, g.sh[0][ch])?;
        }
        for ch in 0..3 {
            for k in 1..coeffs {
                put(&mut w, g.sh[k][ch])?;
            }
        }
        put(&mut w, g.opacity_logits[0])?;
        for v in g.log_scale.iter().chain(&g.rot).chain(&g.beta).chain(&g.dir) {
            put(&mut w, *v)?;
        }
        put(&mut w, g.opacity_logits[1])?;
    }
    w.flush()
}

pub fn load_ply<T: Real>(path: impl AsRef<Path>) -> Result<Scene<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply(file)
}

pub fn save_ply<T: Real>(scene: &Scene<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply(scene, file).map_err(|e| Error::io(path, e))
}
