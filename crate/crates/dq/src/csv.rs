//! RFC 4180 reading and writing of entity files.
//!
//! An unquoted empty field and the unquoted token `\N` are null; a quoted
//! field is always a value, so `""` is the empty text.

use dq_core::schema::EntitySchema;
use dq_core::table::Entity;
use dq_core::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}{}: {message}", column.as_ref().map(|c| format!(", column `{c}`")).unwrap_or_default())]
pub struct CsvError {
    /// 1-based line where the offending record starts.
    pub line: usize,
    pub column: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub text: String,
    pub quoted: bool,
}

/// Splits `input` into records; each carries the line it starts on.
pub fn parse_records(input: &str) -> Result<Vec<(usize, Vec<Field>)>, CsvError> {
    let input = input.strip_prefix('\u{feff}').unwrap_or(input);
    let bytes = input.as_bytes();
    let mut records = Vec::new();
    let mut line = 1;
    let mut i = 0;
    while i < bytes.len() {
        let start_line = line;
        let mut fields = Vec::new();
        loop {
            let mut text = String::new();
            let quoted = bytes.get(i) == Some(&b'"');
            if quoted {
                i += 1;
                loop {
                    let Some(rel) = input[i..].find('"') else {
                        return Err(CsvError {
                            line: start_line,
                            column: None,
                            message: "unterminated quoted field".into(),
                        });
                    };
                    let chunk = &input[i..i + rel];
                    line += chunk.bytes().filter(|&b| b == b'\n').count();
                    text.push_str(chunk);
                    i += rel + 1;
                    if bytes.get(i) == Some(&b'"') {
                        text.push('"');
                        i += 1;
                    } else {
                        break;
                    }
                }
                match bytes.get(i) {
                    None | Some(b',') | Some(b'\n') => {}
                    Some(b'\r') if bytes.get(i + 1) == Some(&b'\n') => {}
                    Some(_) => {
                        return Err(CsvError {
                            line,
                            column: None,
                            message: "unexpected character after closing quote".into(),
                        })
                    }
                }
            } else {
                let end = input[i..]
                    .find([',', '\n', '\r', '"'])
                    .map_or(bytes.len(), |r| i + r);
                if bytes.get(end) == Some(&b'"') {
                    return Err(CsvError {
                        line,
                        column: None,
                        message: "quote inside an unquoted field".into(),
                    });
                }
                if bytes.get(end) == Some(&b'\r') && bytes.get(end + 1) != Some(&b'\n') {
                    return Err(CsvError {
                        line,
                        column: None,
                        message: "bare carriage return".into(),
                    });
                }
                text.push_str(&input[i..end]);
                i = end;
            }
            fields.push(Field { text, quoted });
            match bytes.get(i) {
                Some(b',') => i += 1,
                Some(b'\r') => {
                    i += 2;
                    line += 1;
                    break;
                }
                Some(b'\n') => {
                    i += 1;
                    line += 1;
                    break;
                }
                _ => break,
            }
        }
        records.push((start_line, fields));
    }
    Ok(records)
}

fn is_null(f: &Field) -> bool {
    !f.quoted && (f.text.is_empty() || f.text == "\\N")
}

/// Reads one entity file whose header must list the schema's columns in
/// order.
pub fn read_entity(schema: &EntitySchema, input: &str) -> Result<Entity, CsvError> {
    let mut records = parse_records(input)?.into_iter();
    let Some((_, header)) = records.next() else {
        return Err(CsvError {
            line: 1,
            column: None,
            message: "missing header row".into(),
        });
    };
    let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let got: Vec<&str> = header.iter().map(|f| f.text.as_str()).collect();
    if expected != got {
        return Err(CsvError {
            line: 1,
            column: None,
            message: format!(
                "header `{}` does not match schema columns `{}`",
                got.join(","),
                expected.join(",")
            ),
        });
    }
    let mut columns: Vec<Vec<Value>> = vec![Vec::new(); schema.columns.len()];
    for (line, fields) in records {
        if fields.len() != schema.columns.len() {
            return Err(CsvError {
                line,
                column: None,
                message: format!(
                    "expected {} fields, found {}",
                    schema.columns.len(),
                    fields.len()
                ),
            });
        }
        for ((col, field), out) in schema.columns.iter().zip(fields).zip(&mut columns) {
            let err = |message: String| CsvError {
                line,
                column: Some(col.name.clone()),
                message,
            };
            let v = if is_null(&field) {
                if !col.nullable {
                    return Err(err("null in non-nullable column".into()));
                }
                Value::Null
            } else {
                Value::parse_as(&field.text, col.datatype).map_err(|e| err(e.to_string()))?
            };
            out.push(v);
        }
    }
    Entity::new(schema.clone(), columns).map_err(|e| CsvError {
        line: 1,
        column: None,
        message: e.to_string(),
    })
}

fn push_field(out: &mut String, v: &Value) {
    match v {
        Value::Null => {}
        Value::Text(s) => {
            let quote = s.is_empty()
                || s == "\\N"
                || s.contains([',', '"', '\n', '\r'])
                || s.starts_with('\u{feff}');
            if quote {
                out.push('"');
                out.push_str(&s.replace('"', "\"\""));
                out.push('"');
            } else {
                out.push_str(s);
            }
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Canonical text: header, one `\n`-terminated line per row, minimal
/// quoting.
pub fn write_entity(entity: &Entity) -> String {
    let schema = entity.schema();
    let mut out = String::new();
    for (i, c) in schema.columns.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_field(&mut out, &Value::Text(c.name.clone()));
    }
    out.push('\n');
    for r in 0..entity.len() {
        for c in 0..schema.columns.len() {
            if c > 0 {
                out.push(',');
            }
            push_field(&mut out, entity.cell(r, c));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use dq_core::schema::ColumnSchema;
    use dq_core::value::DataType;

    fn schema() -> EntitySchema {
        EntitySchema {
            name: "person".into(),
            columns: vec![
                ColumnSchema {
                    name: "id".into(),
                    datatype: DataType::Text,
                    nullable: false,
                },
                ColumnSchema {
                    name: "note".into(),
                    datatype: DataType::Text,
                    nullable: true,
                },
                ColumnSchema {
                    name: "age".into(),
                    datatype: DataType::Integer,
                    nullable: true,
                },
            ],
            key: None,
        }
    }

    #[test]
    fn nulls_and_empty_text_differ() {
        let e = read_entity(&schema(), "id,note,age\na,,1\nb,\"\",\\N\nc,\"\\N\",\r\n").unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e.cell(0, 1), &Value::Null);
        assert_eq!(e.cell(1, 1), &Value::Text(String::new()));
        assert_eq!(e.cell(1, 2), &Value::Null);
        assert_eq!(e.cell(2, 1), &Value::Text("\\N".into()));
    }

    #[test]
    fn quoting_round_trips() {
        let src = "id,note,age\n\"x,y\",\"say \"\"hi\"\"\nthere\",7\nz,,\n";
        let e = read_entity(&schema(), src).unwrap();
        assert_eq!(e.cell(0, 0), &Value::Text("x,y".into()));
        assert_eq!(e.cell(0, 1), &Value::Text("say \"hi\"\nthere".into()));
        assert_eq!(write_entity(&e), src);
    }

    #[test]
    fn errors_carry_line_and_column() {
        let err = read_entity(&schema(), "id,note,age\na,b,1\nc,d,x\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.column.as_deref(), Some("age"));
        let err = read_entity(&schema(), "id,note,age\n,b,1\n").unwrap_err();
        assert_eq!(err.to_string(), "line 2, column `id`: null in non-nullable column");
        let err = read_entity(&schema(), "id,age,note\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = read_entity(&schema(), "id,note,age\na,\"open\n").unwrap_err();
        assert!(err.message.contains("unterminated"));
        let err = read_entity(&schema(), "id,note,age\na,b\n").unwrap_err();
        assert!(err.message.contains("expected 3 fields"));
    }

    #[test]
    fn header_only_is_empty_entity() {
        let e = read_entity(&schema(), "id,note,age\n").unwrap();
        assert!(e.is_empty());
        assert!(read_entity(&schema(), "").is_err());
    }
}
