//! PLY point-cloud I/O.
//!
//! Writes binary-little-endian with the property list
//! `x, y, z, reflectivity: float32; t: float64; [red, green, blue: uint8]`.
//! The reader also accepts ascii files, tolerates extra properties, accepts
//! `intensity` in place of `reflectivity` (integer-typed intensity is
//! rescaled by 1/255), and fills missing reflectivity with 0.5 and missing
//! timestamps with 0.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::FormatError;
use crate::cloud::ReflectivityCloud;

pub fn write_ply(path: &Path, cloud: &ReflectivityCloud) -> Result<(), FormatError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = cloud.len();
    let has_color = cloud.colors.is_some();
    write!(
        f,
        "ply\nformat binary_little_endian 1.0\nelement vertex {n}\n\
         property float x\nproperty float y\nproperty float z\n\
         property float reflectivity\nproperty double t\n"
    )?;
    if has_color {
        write!(f, "property uchar red\nproperty uchar green\nproperty uchar blue\n")?;
    }
    writeln!(f, "end_header")?;
    for i in 0..n {
        let p = cloud.points[i];
        for v in [p.x as f32, p.y as f32, p.z as f32, cloud.reflectivity[i] as f32] {
            f.write_all(&v.to_le_bytes())?;
        }
        f.write_all(&cloud.timestamps[i].to_le_bytes())?;
        if let Some(colors) = &cloud.colors {
            for c in colors[i] {
                f.write_all(&[(c.clamp(0.0, 1.0) * 255.0).round() as u8])?;
            }
        }
    }
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    Char,
    UChar,
    Short,
    UShort,
    Int,
    UInt,
    Float,
    Double,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::Char,
            "uchar" | "uint8" => Self::UChar,
            "short" | "int16" => Self::Short,
            "ushort" | "uint16" => Self::UShort,
            "int" | "int32" => Self::Int,
            "uint" | "uint32" => Self::UInt,
            "float" | "float32" => Self::Float,
            "double" | "float64" => Self::Double,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::Char | Self::UChar => 1,
            Self::Short | Self::UShort => 2,
            Self::Int | Self::UInt => 4,
            Self::Float => 4,
            Self::Double => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Self::Float | Self::Double)
    }

    fn read_le(self, buf: &[u8]) -> f64 {
        match self {
            Self::Char => buf[0] as i8 as f64,
            Self::UChar => buf[0] as f64,
            Self::Short => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            Self::UShort => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            Self::Int => i32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Self::UInt => u32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Self::Float => f32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Self::Double => f64::from_le_bytes(buf[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { count_ty: ScalarType, item_ty: ScalarType },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

pub fn read_ply(path: &Path) -> Result<ReflectivityCloud, FormatError> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut line_no = 0usize;
    let mut byte_offset = 0usize;

    let magic = read_header_line(&mut reader, &mut line_no, &mut byte_offset)?;
    if magic.trim() != "ply" {
        return Err(FormatError::parse("line 1", "missing 'ply' magic"));
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = read_header_line(&mut reader, &mut line_no, &mut byte_offset)?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                format = match tok.next() {
                    Some("ascii") => Some(PlyFormat::Ascii),
                    Some("binary_little_endian") => Some(PlyFormat::BinaryLittleEndian),
                    Some("binary_big_endian") => {
                        return Err(FormatError::UnsupportedFormat(
                            "big-endian PLY is not supported".into(),
                        ))
                    }
                    other => {
                        return Err(FormatError::parse(
                            format!("line {line_no}"),
                            format!("unknown format {other:?}"),
                        ))
                    }
                };
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| FormatError::parse(format!("line {line_no}"), "element needs a name"))?
                    .to_string();
                let count: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| FormatError::parse(format!("line {line_no}"), "bad element count"))?;
                elements.push(Element {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let elem = elements.last_mut().ok_or_else(|| {
                    FormatError::parse(format!("line {line_no}"), "property before element")
                })?;
                let first = tok.next().unwrap_or("");
                if first == "list" {
                    let count_ty = tok.next().and_then(ScalarType::parse).ok_or_else(|| {
                        FormatError::parse(format!("line {line_no}"), "bad list count type")
                    })?;
                    let item_ty = tok.next().and_then(ScalarType::parse).ok_or_else(|| {
                        FormatError::parse(format!("line {line_no}"), "bad list item type")
                    })?;
                    elem.properties.push(Property::List { count_ty, item_ty });
                } else {
                    let ty = ScalarType::parse(first).ok_or_else(|| {
                        FormatError::parse(format!("line {line_no}"), format!("unknown type '{first}'"))
                    })?;
                    let name = tok
                        .next()
                        .ok_or_else(|| {
                            FormatError::parse(format!("line {line_no}"), "property needs a name")
                        })?
                        .to_string();
                    elem.properties.push(Property::Scalar { name, ty });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(FormatError::parse(
                    format!("line {line_no}"),
                    format!("unknown header keyword '{other}'"),
                ));
            }
        }
    }
    let format = format
        .ok_or_else(|| FormatError::parse(format!("line {line_no}"), "missing format line"))?;

    let mut cloud = ReflectivityCloud::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut saw_color = false;

    for elem in &elements {
        let is_vertex = elem.name == "vertex";
        // Column lookups within this element.
        let find = |n: &str| {
            elem.properties.iter().position(
                |p| matches!(p, Property::Scalar { name, .. } if name == n),
            )
        };
        let (ix, iy, iz) = (find("x"), find("y"), find("z"));
        if is_vertex && (ix.is_none() || iy.is_none() || iz.is_none()) {
            return Err(FormatError::parse(
                "header",
                "vertex element lacks x/y/z properties",
            ));
        }
        let irefl = find("reflectivity").or_else(|| find("intensity"));
        let refl_is_int = irefl.is_some_and(|i| {
            matches!(&elem.properties[i], Property::Scalar { ty, .. } if ty.is_integer())
        });
        let it = find("t").or_else(|| find("time")).or_else(|| find("timestamp"));
        let (ir, ig, ib) = (find("red"), find("green"), find("blue"));
        let has_color = ir.is_some() && ig.is_some() && ib.is_some();
        if is_vertex && has_color {
            saw_color = true;
        }

        for row in 0..elem.count {
            let values = match format {
                PlyFormat::Ascii => read_ascii_row(&mut reader, elem, &mut line_no)?,
                PlyFormat::BinaryLittleEndian => {
                    read_binary_row(&mut reader, elem, &mut byte_offset)?
                }
            };
            if !is_vertex {
                continue;
            }
            let get = |idx: Option<usize>, default: f64| idx.map_or(default, |i| values[i]);
            let p = Vector3::new(
                values[ix.unwrap()],
                values[iy.unwrap()],
                values[iz.unwrap()],
            );
            let mut refl = get(irefl, 0.5);
            if refl_is_int {
                refl /= 255.0;
            }
            cloud.push(p, refl.clamp(0.0, 1.0), get(it, 0.0));
            if has_color {
                colors.push([
                    get(ir, 0.0) / 255.0,
                    get(ig, 0.0) / 255.0,
                    get(ib, 0.0) / 255.0,
                ]);
            }
            let _ = row;
        }
    }
    if saw_color {
        cloud.colors = Some(colors);
    }
    Ok(cloud)
}

fn read_header_line(
    r: &mut BufReader<std::fs::File>,
    line_no: &mut usize,
    byte_offset: &mut usize,
) -> Result<String, FormatError> {
    let mut line = String::new();
    let n = r
        .read_line(&mut line)
        .map_err(|e| FormatError::parse(format!("line {}", *line_no + 1), e.to_string()))?;
    if n == 0 {
        return Err(FormatError::parse(
            format!("line {}", *line_no + 1),
            "unexpected end of header",
        ));
    }
    *line_no += 1;
    *byte_offset += n;
    Ok(line.trim_end().to_string())
}

fn read_ascii_row(
    reader: &mut BufReader<std::fs::File>,
    elem: &Element,
    line_no: &mut usize,
) -> Result<Vec<f64>, FormatError> {
    let mut line = String::new();
    // skip blank lines
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| FormatError::parse(format!("line {}", *line_no + 1), e.to_string()))?;
        *line_no += 1;
        if n == 0 {
            return Err(FormatError::parse(
                format!("line {line_no}"),
                "unexpected end of file in vertex data",
            ));
        }
        if !line.trim().is_empty() {
            break;
        }
    }
    let mut tok = line.split_whitespace();
    let mut values = Vec::with_capacity(elem.properties.len());
    for prop in &elem.properties {
        match prop {
            Property::Scalar { .. } => {
                let v: f64 = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| FormatError::parse(format!("line {line_no}"), "bad scalar"))?;
                values.push(v);
            }
            Property::List { .. } => {
                let count: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| FormatError::parse(format!("line {line_no}"), "bad list count"))?;
                for _ in 0..count {
                    tok.next().ok_or_else(|| {
                        FormatError::parse(format!("line {line_no}"), "truncated list")
                    })?;
                }
                values.push(f64::NAN); // placeholder, lists are ignored
            }
        }
    }
    Ok(values)
}

fn read_binary_row(
    reader: &mut BufReader<std::fs::File>,
    elem: &Element,
    byte_offset: &mut usize,
) -> Result<Vec<f64>, FormatError> {
    let mut values = Vec::with_capacity(elem.properties.len());
    let read_exact = |r: &mut BufReader<std::fs::File>, n: usize, off: &mut usize| -> Result<[u8; 8], FormatError> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b[..n]).map_err(|_| {
            FormatError::parse(
                format!("byte {}", *off),
                "truncated binary payload",
            )
        })?;
        *off += n;
        Ok(b)
    };
    for prop in &elem.properties {
        match prop {
            Property::Scalar { ty, .. } => {
                let buf = read_exact(reader, ty.size(), byte_offset)?;
                values.push(ty.read_le(&buf));
            }
            Property::List { count_ty, item_ty } => {
                let buf = read_exact(reader, count_ty.size(), byte_offset)?;
                let count = count_ty.read_le(&buf) as usize;
                if count > 1 << 20 {
                    return Err(FormatError::parse(
                        format!("byte {byte_offset}"),
                        "implausible list length",
                    ));
                }
                for _ in 0..count {
                    read_exact(reader, item_ty.size(), byte_offset)?;
                }
                values.push(f64::NAN);
            }
        }
    }
    Ok(values)
}
