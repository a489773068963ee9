//! Database schema catalog: tables, columns, primary and foreign keys.
//!
//! Two document formats load into a [`DatabaseSchema`]:
//!
//! * the native format, a JSON object with `database` and `metadata` keys
//!   (plus optional `types`, `primary_keys` and `foreign_keys`);
//! * SPIDER's `tables.json`, an array of entries keyed by `db_id`.
//!
//! Name resolution is exact first, then ASCII case-insensitive. A
//! case-insensitive hit reports the canonical spelling found in the schema.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("schema parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("empty schema")]
    Empty,
    #[error("duplicate {what} '{name}' at {location}")]
    Duplicate {
        what: &'static str,
        name: String,
        location: String,
    },
    #[error("dangling key reference '{reference}' at {location}")]
    DanglingKey { reference: String, location: String },
    #[error("invalid schema at {location}: {message}")]
    Invalid { location: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_err(location: impl Into<String>, message: impl fmt::Display) -> SchemaError {
    SchemaError::Parse {
        location: location.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Text,
    Integer,
    Real,
    Boolean,
    Date,
    Other,
}

impl DataType {
    /// Maps the loose type names found in SPIDER and hand-written schemas.
    pub fn from_name(name: &str) -> DataType {
        match name.trim().to_ascii_lowercase().as_str() {
            "text" | "varchar" | "char" | "string" => DataType::Text,
            "int" | "integer" | "bigint" | "smallint" => DataType::Integer,
            "number" | "real" | "float" | "double" | "numeric" | "decimal" => DataType::Real,
            "bool" | "boolean" => DataType::Boolean,
            "date" | "time" | "datetime" | "timestamp" => DataType::Date,
            _ => DataType::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Text => "text",
            DataType::Integer => "integer",
            DataType::Real => "real",
            DataType::Boolean => "boolean",
            DataType::Date => "date",
            DataType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub data_type: Option<DataType>,
}

impl Column {
    pub fn new(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            data_type: None,
        }
    }

    pub fn typed(name: impl Into<String>, data_type: DataType) -> Self {
        Column {
            name: name.into(),
            data_type: Some(data_type),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        Table {
            name: name.into(),
            columns,
        }
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

/// A `table.column` address.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }

    fn parse_dotted(text: &str, location: &str) -> Result<Self, SchemaError> {
        match text.split_once('.') {
            Some((t, c)) if !t.is_empty() && !c.is_empty() => Ok(ColumnRef::new(t, c)),
            _ => Err(parse_err(location, format!("expected 'table.column', got '{text}'"))),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKey {
    pub from: ColumnRef,
    pub to: ColumnRef,
}

/// The catalog `(S, K_p, K_f)` for one database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseSchema {
    pub name: String,
    pub tables: Vec<Table>,
    pub primary_keys: Vec<ColumnRef>,
    pub foreign_keys: Vec<ForeignKey>,
}

/// Result of resolving a table name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Exact,
    /// Matched ignoring ASCII case; carries the schema's spelling.
    CaseFold(String),
    Absent,
}

/// Result of resolving a column name, qualified by its owning table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnResolution {
    Exact {
        table: String,
    },
    CaseFold {
        table: String,
        column: String,
    },
    /// The unqualified name exists in several tables.
    Ambiguous {
        tables: Vec<String>,
    },
    Absent,
}

impl DatabaseSchema {
    /// Builds a schema and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        tables: Vec<Table>,
        primary_keys: Vec<ColumnRef>,
        foreign_keys: Vec<ForeignKey>,
    ) -> Result<Self, SchemaError> {
        let schema = DatabaseSchema {
            name: name.into(),
            tables,
            primary_keys,
            foreign_keys,
        };
        schema.check()?;
        Ok(schema)
    }

    fn check(&self) -> Result<(), SchemaError> {
        if self.name.trim().is_empty() {
            return Err(SchemaError::Invalid {
                location: "database".into(),
                message: "database name is empty".into(),
            });
        }
        if self.tables.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut seen_tables = HashSet::new();
        for (ti, table) in self.tables.iter().enumerate() {
            let location = format!("metadata[{ti}]");
            if table.name.is_empty() {
                return Err(SchemaError::Invalid {
                    location,
                    message: "table name is empty".into(),
                });
            }
            if !seen_tables.insert(table.name.to_ascii_lowercase()) {
                return Err(SchemaError::Duplicate {
                    what: "table",
                    name: table.name.clone(),
                    location,
                });
            }
            if table.columns.is_empty() {
                return Err(SchemaError::Invalid {
                    location,
                    message: format!("table '{}' has no columns", table.name),
                });
            }
            let mut seen_cols = HashSet::new();
            for (ci, col) in table.columns.iter().enumerate() {
                let location = format!("metadata[{ti}].columns[{ci}]");
                if col.name.is_empty() {
                    return Err(SchemaError::Invalid {
                        location,
                        message: "column name is empty".into(),
                    });
                }
                if !seen_cols.insert(col.name.to_ascii_lowercase()) {
                    return Err(SchemaError::Duplicate {
                        what: "column",
                        name: format!("{}.{}", table.name, col.name),
                        location,
                    });
                }
            }
        }
        for (i, key) in self.primary_keys.iter().enumerate() {
            self.check_ref(key, &format!("primary_keys[{i}]"))?;
        }
        for (i, fk) in self.foreign_keys.iter().enumerate() {
            self.check_ref(&fk.from, &format!("foreign_keys[{i}].from"))?;
            self.check_ref(&fk.to, &format!("foreign_keys[{i}].to"))?;
        }
        Ok(())
    }

    fn check_ref(&self, key: &ColumnRef, location: &str) -> Result<(), SchemaError> {
        let found = self
            .table(&key.table)
            .is_some_and(|t| t.columns.iter().any(|c| c.name == key.column));
        if found {
            Ok(())
        } else {
            Err(SchemaError::DanglingKey {
                reference: key.to_string(),
                location: location.to_string(),
            })
        }
    }

    /// Exact-spelling table lookup.
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Table lookup accepting either the exact or the case-folded spelling.
    pub fn table_folded(&self, name: &str) -> Option<&Table> {
        self.table(name)
            .or_else(|| self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name)))
    }

    pub fn resolve_table(&self, name: &str) -> Resolution {
        if self.table(name).is_some() {
            return Resolution::Exact;
        }
        match self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name)) {
            Some(t) => Resolution::CaseFold(t.name.clone()),
            None => Resolution::Absent,
        }
    }

    /// Resolves a column, either inside `table_hint` or across all tables.
    ///
    /// A hint that does not itself resolve yields [`ColumnResolution::Absent`].
    pub fn resolve_column(&self, table_hint: Option<&str>, name: &str) -> ColumnResolution {
        match table_hint {
            Some(hint) => match self.table_folded(hint) {
                Some(table) => resolve_in_table(table, name),
                None => ColumnResolution::Absent,
            },
            None => {
                let tables: Vec<&Table> = self.tables.iter().collect();
                resolve_across(&tables, name)
            }
        }
    }

    /// Every table name followed by every column name, in schema order,
    /// without case-insensitive repeats.
    pub fn identifier_names(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let names = self
            .tables
            .iter()
            .map(|t| t.name.as_str())
            .chain(self.tables.iter().flat_map(|t| t.column_names()));
        for name in names {
            if seen.insert(name.to_ascii_lowercase()) {
                out.push(name.to_string());
            }
        }
        out
    }

    /// Loads one schema from a native document.
    pub fn from_native_json(text: &str) -> Result<Self, SchemaError> {
        let doc: NativeSchemaDoc = serde_json::from_str(text).map_err(|e| parse_err(json_location(&e), &e))?;
        doc.into_schema()
    }

    pub fn to_native_json(&self) -> String {
        serde_json::to_string_pretty(&NativeSchemaDoc::from_schema(self))
            .expect("native schema serialization is infallible")
    }

    /// Python-dict style inline rendering used in training strings:
    /// `{'database': 'geo', 'metadata': [{'name': 'city', 'columns': [...]}]}`.
    pub fn render_inline(&self) -> String {
        let tables: Vec<String> = self
            .tables
            .iter()
            .map(|t| {
                let cols: Vec<String> = t.columns.iter().map(|c| py_quote(&c.name)).collect();
                format!("{{'name': {}, 'columns': [{}]}}", py_quote(&t.name), cols.join(", "))
            })
            .collect();
        format!(
            "{{'database': {}, 'metadata': [{}]}}",
            py_quote(&self.name),
            tables.join(", ")
        )
    }

    /// Compact `Table(col, col), Other(col)` rendering used by line prompts.
    pub fn render_compact(&self) -> String {
        self.tables
            .iter()
            .map(|t| format!("{}({})", t.name, t.column_names().collect::<Vec<_>>().join(", ")))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Compact rendering with column types and key relations spelled out.
    pub fn render_detailed(&self) -> String {
        let mut out = self
            .tables
            .iter()
            .map(|t| {
                let cols: Vec<String> = t
                    .columns
                    .iter()
                    .map(|c| match c.data_type {
                        Some(ty) => format!("{} {}", c.name, ty.as_str()),
                        None => c.name.clone(),
                    })
                    .collect();
                format!("{}({})", t.name, cols.join(", "))
            })
            .collect::<Vec<_>>()
            .join(", ");
        if !self.primary_keys.is_empty() {
            let keys: Vec<String> = self.primary_keys.iter().map(ToString::to_string).collect();
            out.push_str("; primary keys: ");
            out.push_str(&keys.join(", "));
        }
        if !self.foreign_keys.is_empty() {
            let keys: Vec<String> = self
                .foreign_keys
                .iter()
                .map(|fk| format!("{} = {}", fk.from, fk.to))
                .collect();
            out.push_str("; foreign keys: ");
            out.push_str(&keys.join(", "));
        }
        out
    }
}

pub(crate) fn resolve_in_table(table: &Table, name: &str) -> ColumnResolution {
    if table.columns.iter().any(|c| c.name == name) {
        return ColumnResolution::Exact {
            table: table.name.clone(),
        };
    }
    match table.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name)) {
        Some(c) => ColumnResolution::CaseFold {
            table: table.name.clone(),
            column: c.name.clone(),
        },
        None => ColumnResolution::Absent,
    }
}

/// Resolves an unqualified column over a set of candidate tables.
pub(crate) fn resolve_across(tables: &[&Table], name: &str) -> ColumnResolution {
    let hits: Vec<ColumnResolution> = tables
        .iter()
        .map(|t| resolve_in_table(t, name))
        .filter(|r| *r != ColumnResolution::Absent)
        .collect();
    match hits.len() {
        0 => ColumnResolution::Absent,
        1 => hits.into_iter().next().unwrap(),
        _ => ColumnResolution::Ambiguous {
            tables: hits
                .into_iter()
                .map(|r| match r {
                    ColumnResolution::Exact { table } | ColumnResolution::CaseFold { table, .. } => table,
                    _ => unreachable!(),
                })
                .collect(),
        },
    }
}

fn py_quote(s: &str) -> String {
    // repr() of a str: single quotes unless the text itself holds one.
    if s.contains('\'') && !s.contains('"') {
        format!("\"{s}\"")
    } else {
        format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
    }
}

fn json_location(e: &serde_json::Error) -> String {
    format!("line {} column {}", e.line(), e.column())
}

#[derive(Debug, Serialize, Deserialize)]
struct NativeTableDoc {
    name: String,
    columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    types: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NativeSchemaDoc {
    database: String,
    metadata: Vec<NativeTableDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    primary_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    foreign_keys: Vec<NativeForeignKey>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NativeForeignKey {
    Pair([String; 2]),
    Object { from: String, to: String },
}

impl NativeSchemaDoc {
    fn into_schema(self) -> Result<DatabaseSchema, SchemaError> {
        let mut tables = Vec::with_capacity(self.metadata.len());
        for (ti, t) in self.metadata.into_iter().enumerate() {
            let columns = match t.types {
                None => t.columns.into_iter().map(Column::new).collect(),
                Some(types) => {
                    if types.len() != t.columns.len() {
                        return Err(SchemaError::Invalid {
                            location: format!("metadata[{ti}].types"),
                            message: format!("{} types for {} columns", types.len(), t.columns.len()),
                        });
                    }
                    t.columns
                        .into_iter()
                        .zip(types)
                        .map(|(c, ty)| Column::typed(c, DataType::from_name(&ty)))
                        .collect()
                }
            };
            tables.push(Table::new(t.name, columns));
        }
        let primary_keys = self
            .primary_keys
            .iter()
            .enumerate()
            .map(|(i, k)| ColumnRef::parse_dotted(k, &format!("primary_keys[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let foreign_keys = self
            .foreign_keys
            .iter()
            .enumerate()
            .map(|(i, fk)| {
                let (from, to) = match fk {
                    NativeForeignKey::Pair([a, b]) => (a, b),
                    NativeForeignKey::Object { from, to } => (from, to),
                };
                let loc = format!("foreign_keys[{i}]");
                Ok(ForeignKey {
                    from: ColumnRef::parse_dotted(from, &loc)?,
                    to: ColumnRef::parse_dotted(to, &loc)?,
                })
            })
            .collect::<Result<Vec<_>, SchemaError>>()?;
        DatabaseSchema::new(self.database, tables, primary_keys, foreign_keys)
    }

    fn from_schema(s: &DatabaseSchema) -> Self {
        NativeSchemaDoc {
            database: s.name.clone(),
            metadata: s
                .tables
                .iter()
                .map(|t| {
                    let typed = t.columns.iter().any(|c| c.data_type.is_some());
                    NativeTableDoc {
                        name: t.name.clone(),
                        columns: t.columns.iter().map(|c| c.name.clone()).collect(),
                        types: typed.then(|| {
                            t.columns
                                .iter()
                                .map(|c| c.data_type.unwrap_or(DataType::Other).as_str().to_string())
                                .collect()
                        }),
                    }
                })
                .collect(),
            primary_keys: s.primary_keys.iter().map(ToString::to_string).collect(),
            foreign_keys: s
                .foreign_keys
                .iter()
                .map(|fk| NativeForeignKey::Pair([fk.from.to_string(), fk.to.to_string()]))
                .collect(),
        }
    }
}

/// Decodes SPIDER `tables.json` (an array of database entries).
pub fn load_spider_tables(text: &str) -> Result<Vec<DatabaseSchema>, SchemaError> {
    let entries: Vec<Value> = serde_json::from_str(text).map_err(|e| parse_err(json_location(&e), &e))?;
    entries.iter().enumerate().map(|(i, e)| spider_entry(e, i)).collect()
}

fn spider_entry(entry: &Value, index: usize) -> Result<DatabaseSchema, SchemaError> {
    let loc = |field: &str| format!("[{index}].{field}");
    let field = |name: &str| entry.get(name).ok_or_else(|| parse_err(loc(name), "missing field"));

    let db_id = field("db_id")?
        .as_str()
        .ok_or_else(|| parse_err(loc("db_id"), "expected string"))?;
    let table_names: Vec<String> = serde_json::from_value(field("table_names_original")?.clone())
        .map_err(|e| parse_err(loc("table_names_original"), e))?;
    let column_names: Vec<(i64, String)> = serde_json::from_value(field("column_names_original")?.clone())
        .map_err(|e| parse_err(loc("column_names_original"), e))?;
    let column_types: Vec<String> = match entry.get("column_types") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| parse_err(loc("column_types"), e))?,
        None => Vec::new(),
    };
    if !column_types.is_empty() && column_types.len() != column_names.len() {
        return Err(SchemaError::Invalid {
            location: loc("column_types"),
            message: format!("{} types for {} columns", column_types.len(), column_names.len()),
        });
    }

    let mut tables: Vec<Table> = table_names.iter().map(|n| Table::new(n.clone(), Vec::new())).collect();
    // Global column index -> (table index, column name); index 0 is the `*` pseudo-column.
    let mut by_index: Vec<Option<ColumnRef>> = Vec::with_capacity(column_names.len());
    for (ci, (ti, name)) in column_names.iter().enumerate() {
        if *ti < 0 {
            by_index.push(None);
            continue;
        }
        let table = tables.get_mut(*ti as usize).ok_or_else(|| SchemaError::DanglingKey {
            reference: format!("table index {ti}"),
            location: format!("[{index}].column_names_original[{ci}]"),
        })?;
        let data_type = column_types.get(ci).map(|t| DataType::from_name(t));
        table.columns.push(Column {
            name: name.clone(),
            data_type,
        });
        by_index.push(Some(ColumnRef::new(table.name.clone(), name.clone())));
    }

    let lookup = |idx: i64, location: String| -> Result<ColumnRef, SchemaError> {
        usize::try_from(idx)
            .ok()
            .and_then(|i| by_index.get(i).cloned().flatten())
            .ok_or(SchemaError::DanglingKey {
                reference: format!("column index {idx}"),
                location,
            })
    };

    let mut primary_keys = Vec::new();
    if let Some(pks) = entry.get("primary_keys").and_then(Value::as_array) {
        for (i, pk) in pks.iter().enumerate() {
            // Newer releases nest composite keys as arrays.
            let indices: Vec<i64> = match pk {
                Value::Array(items) => items.iter().filter_map(Value::as_i64).collect(),
                other => other.as_i64().into_iter().collect(),
            };
            for idx in indices {
                primary_keys.push(lookup(idx, format!("[{index}].primary_keys[{i}]"))?);
            }
        }
    }
    let mut foreign_keys = Vec::new();
    if let Some(fks) = entry.get("foreign_keys").and_then(Value::as_array) {
        for (i, fk) in fks.iter().enumerate() {
            let pair: [i64; 2] =
                serde_json::from_value(fk.clone()).map_err(|e| parse_err(format!("[{index}].foreign_keys[{i}]"), e))?;
            foreign_keys.push(ForeignKey {
                from: lookup(pair[0], format!("[{index}].foreign_keys[{i}]"))?,
                to: lookup(pair[1], format!("[{index}].foreign_keys[{i}]"))?,
            });
        }
    }
    DatabaseSchema::new(db_id, tables, primary_keys, foreign_keys).map_err(|e| match e {
        SchemaError::Empty => SchemaError::Empty,
        other => SchemaError::Invalid {
            location: format!("[{index}] ({db_id})"),
            message: other.to_string(),
        },
    })
}

/// Loads a schema document in either format: an object is a native
/// schema, an array is SPIDER `tables.json`.
pub fn load_schema(text: &str) -> Result<Vec<DatabaseSchema>, SchemaError> {
    match text.trim_start().chars().next() {
        Some('[') => load_spider_tables(text),
        Some('{') => Ok(vec![DatabaseSchema::from_native_json(text)?]),
        _ => Err(parse_err("line 1 column 1", "expected a JSON object or array")),
    }
}

/// Schemas keyed by database name.
#[derive(Debug, Clone, Default)]
pub struct SchemaCatalog {
    schemas: BTreeMap<String, Arc<DatabaseSchema>>,
}

impl SchemaCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, schema: DatabaseSchema) -> Result<(), SchemaError> {
        if self.schemas.contains_key(&schema.name) {
            return Err(SchemaError::Duplicate {
                what: "database",
                name: schema.name.clone(),
                location: "catalog".into(),
            });
        }
        self.schemas.insert(schema.name.clone(), Arc::new(schema));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Arc<DatabaseSchema>> {
        self.schemas.get(name)
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<DatabaseSchema>> {
        self.schemas.values()
    }

    /// Loads a single schema file or every `*.json` file under a directory.
    pub fn load_path(path: &Path) -> Result<Self, SchemaError> {
        let mut catalog = SchemaCatalog::new();
        let files = if path.is_dir() {
            let mut files: Vec<_> = std::fs::read_dir(path)
                .map_err(|source| SchemaError::Io {
                    path: path.display().to_string(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            files
        } else {
            vec![path.to_path_buf()]
        };
        for file in files {
            let text = std::fs::read_to_string(&file).map_err(|source| SchemaError::Io {
                path: file.display().to_string(),
                source,
            })?;
            let schemas = load_schema(&text).map_err(|e| SchemaError::Invalid {
                location: file.display().to_string(),
                message: e.to_string(),
            })?;
            for s in schemas {
                catalog.insert(s)?;
            }
        }
        Ok(catalog)
    }
}

impl FromIterator<DatabaseSchema> for SchemaCatalog {
    /// Later schemas with a repeated name replace earlier ones.
    fn from_iter<I: IntoIterator<Item = DatabaseSchema>>(iter: I) -> Self {
        SchemaCatalog {
            schemas: iter.into_iter().map(|s| (s.name.clone(), Arc::new(s))).collect(),
        }
    }
}
