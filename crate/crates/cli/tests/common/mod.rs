#![allow(dead_code)]

use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

pub struct Run {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn ok(self) -> Run {
        assert_eq!(
            self.status, 0,
            "command failed\nstdout:\n{}\nstderr:\n{}",
            self.stdout, self.stderr
        );
        self
    }

    pub fn failed(self) -> Run {
        assert_ne!(
            self.status, 0,
            "command unexpectedly succeeded\nstdout:\n{}",
            self.stdout
        );
        assert!(
            self.stderr.starts_with("error: "),
            "no diagnostic: {:?}",
            self.stderr
        );
        self
    }
}

pub fn tripletgen<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let Output {
        status,
        stdout,
        stderr,
    } = Command::new(env!("CARGO_BIN_EXE_tripletgen"))
        .args(args)
        .output()
        .expect("spawning tripletgen");
    Run {
        status: status.code().unwrap_or(-1),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

/// A scratch directory with helpers for writing fixtures into it.
pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, contents).unwrap();
        p
    }

    pub fn catalog(
        &self,
        prefix: &str,
        entities: &[&str],
        relations: &[&str],
    ) -> (PathBuf, PathBuf) {
        let tsv = |names: &[&str]| {
            names
                .iter()
                .enumerate()
                .map(|(i, n)| format!("{i}\t{n}\n"))
                .collect::<String>()
        };
        (
            self.write(&format!("{prefix}entities.tsv"), &tsv(entities)),
            self.write(&format!("{prefix}relations.tsv"), &tsv(relations)),
        )
    }

    pub fn jsonl(&self, name: &str, records: &[Value]) -> PathBuf {
        let text: String = records.iter().map(|r| format!("{r}\n")).collect();
        self.write(name, &text)
    }

    /// Names of regular files in the directory, sorted.
    pub fn listing(&self) -> Vec<String> {
        let mut names: Vec<String> = fs::read_dir(self.dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        names
    }
}

pub fn catalog_flags(entities: &Path, relations: &Path) -> Vec<String> {
    vec![
        "--entity-catalog".into(),
        entities.display().to_string(),
        "--relation-catalog".into(),
        relations.display().to_string(),
    ]
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn triplet(sub: &str, rel: &str, obj: &str) -> Value {
    serde_json::json!({"sub": sub, "rel": rel, "obj": obj})
}

/// `(sub, rel, obj)` names of a JSON triplet list, sorted.
pub fn triplet_names(list: &Value) -> Vec<(String, String, String)> {
    let mut out: Vec<_> = list
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            let s = |k: &str| t[k].as_str().unwrap().to_owned();
            (s("sub"), s("rel"), s("obj"))
        })
        .collect();
    out.sort();
    out
}

pub const TOY_ENTITIES: [&str; 10] = [
    "Cairo", "Delhi", "Paris", "Turin", "Basel", "Genoa", "Minsk", "Rabat", "Vaduz", "Nancy",
];
pub const TOY_RELATIONS: [&str; 10] = [
    "twin city",
    "rail link",
    "ferry hub",
    "sister of",
    "across to",
    "east from",
    "near lake",
    "lies west",
    "over hill",
    "bus lines",
];

/// `n` documents cycling over ten facts written with five templates each.
/// Sentences end in the subject and names have equal lengths, so a byte
/// trigram trained on the corpus can recover each fact.
pub fn toy_documents(n: usize) -> Vec<Value> {
    let templates: [fn(&str, &str, &str) -> String; 5] = [
        |s, r, o| format!("{o} has {r} with {s}"),
        |s, r, o| format!("{o} is the {r} of {s}"),
        |s, r, o| format!("the {r} of {o} belongs to {s}"),
        |s, r, o| format!("{r} {o}, says {s}"),
        |s, r, o| format!("via {r} {o} reaches {s}"),
    ];
    (0..n)
        .map(|i| {
            let (fact, template) = ((i / 5) % 10, i % 5);
            let (s, r, o) = (
                TOY_ENTITIES[fact],
                TOY_RELATIONS[(fact * 3) % 10],
                TOY_ENTITIES[(fact + 3) % 10],
            );
            serde_json::json!({
                "id": format!("d{i:03}"),
                "input": templates[template](s, r, o),
                "triplets": [triplet(s, r, o)],
            })
        })
        .collect()
}
