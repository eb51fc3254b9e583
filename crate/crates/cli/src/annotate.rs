//! Terminal annotation session with an append-only journal.
//!
//! Journal lines are `track_id<TAB>tag<TAB>verdict<TAB>annotator`; a session
//! replays them before prompting, so quitting and rerunning never asks for
//! the same cell twice.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command};

use anyhow::{bail, Context, Result};
use tagnoise::tagdata::{AnnotationSet, LabelMatrix, Verdict};

const JOURNAL_HEADER: &str = "# tagnoise annotation journal v1";

pub fn journal_path(subset: &Path) -> PathBuf {
    let mut s = subset.as_os_str().to_owned();
    s.push(".journal");
    PathBuf::from(s)
}

fn parse_verdict(s: &str) -> Option<Verdict> {
    match s {
        "0" => Some(Verdict::Negative),
        "1" => Some(Verdict::Positive),
        "skip" => Some(Verdict::Skip),
        _ => None,
    }
}

/// Verdicts recorded so far, keyed by `(track_id, tag name)`.
pub fn read_journal(path: &Path) -> Result<HashMap<(String, String), (Verdict, String)>> {
    let mut out = HashMap::new();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let verdict = (f.len() == 4).then(|| parse_verdict(f[2])).flatten();
        let Some(verdict) = verdict else {
            bail!(
                "journal {} is corrupt at line {}: `{line}`\n\
                 Every answer before that line is intact. Delete line {} and everything after it \
                 to resume from the last good answer, or delete the journal to start over.",
                path.display(),
                i + 1,
                i + 1
            );
        };
        out.insert((f[0].to_string(), f[1].to_string()), (verdict, f[3].to_string()));
    }
    Ok(out)
}

/// Applies journalled verdicts to the pending records of `set`.
pub fn replay(set: &mut AnnotationSet, matrix: &LabelMatrix, journal: &HashMap<(String, String), (Verdict, String)>) -> usize {
    let mut applied = 0;
    for r in set.records.iter_mut().filter(|r| r.verdict.is_none()) {
        let key = (r.track_id.clone(), matrix.vocab().tag(r.tag).to_string());
        if let Some((v, who)) = journal.get(&key) {
            r.verdict = Some(*v);
            r.annotator = if who == "-" { String::new() } else { who.clone() };
            applied += 1;
        }
    }
    applied
}

pub struct Session<'a> {
    pub matrix: &'a LabelMatrix,
    pub journal: PathBuf,
    pub annotator: String,
    pub audio_dir: Option<PathBuf>,
    /// External playback command; the audio path is appended as the last argument.
    pub player: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Quit { pending: usize },
}

enum Answer {
    Verdict(Verdict),
    Replay,
    Quit,
    Invalid,
}

fn parse_answer(s: &str) -> Answer {
    match s.trim() {
        "0" | "n" | "no" => Answer::Verdict(Verdict::Negative),
        "1" | "y" | "yes" => Answer::Verdict(Verdict::Positive),
        "s" | "skip" => Answer::Verdict(Verdict::Skip),
        "r" | "replay" => Answer::Replay,
        "q" | "quit" => Answer::Quit,
        _ => Answer::Invalid,
    }
}

impl Session<'_> {
    fn audio_for(&self, track: &str) -> Option<PathBuf> {
        let p = self.audio_dir.as_ref()?.join(format!("{track}.wav"));
        p.exists().then_some(p)
    }

    fn play(&self, path: &Path, out: &mut impl Write) -> Option<Child> {
        let cmd = self.player.as_ref()?;
        let mut parts = cmd.split_whitespace();
        let program = parts.next()?;
        match Command::new(program).args(parts).arg(path).spawn() {
            Ok(child) => Some(child),
            Err(e) => {
                let _ = writeln!(out, "  (could not start player `{cmd}`: {e})");
                None
            }
        }
    }

    /// Prompts for every pending record, journalling each answer as it is
    /// given. End of input counts as quitting.
    pub fn run(&self, set: &mut AnnotationSet, input: &mut impl BufRead, out: &mut impl Write) -> Result<Outcome> {
        let total = set.records.len();
        let mut journal = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.journal)
            .with_context(|| format!("opening journal {}", self.journal.display()))?;
        if journal.metadata()?.len() == 0 {
            writeln!(journal, "{JOURNAL_HEADER}")?;
        }
        for idx in 0..total {
            if set.records[idx].verdict.is_some() {
                continue;
            }
            let (track, tag) = (set.records[idx].track_id.clone(), set.records[idx].tag);
            let tag_name = self.matrix.vocab().tag(tag).to_string();
            let done = set.records.iter().filter(|r| r.verdict.is_some()).count();
            writeln!(out, "[{}/{total}] track {track}   tag `{tag_name}`", done + 1)?;
            let audio = self.audio_for(&track);
            match &audio {
                Some(p) => writeln!(out, "  audio: {}", p.display())?,
                None if self.audio_dir.is_some() => writeln!(out, "  audio: (no {track}.wav found)")?,
                None => {}
            }
            let mut child = audio.as_deref().and_then(|p| self.play(p, out));
            let verdict = loop {
                write!(out, "  does the tag apply? [1 yes / 0 no / s skip / r replay / q quit] ")?;
                out.flush()?;
                let mut line = String::new();
                if input.read_line(&mut line)? == 0 {
                    writeln!(out)?;
                    break None;
                }
                match parse_answer(&line) {
                    Answer::Verdict(v) => break Some(v),
                    Answer::Quit => break None,
                    Answer::Replay => {
                        if let Some(c) = child.as_mut() {
                            let _ = c.kill();
                            let _ = c.wait();
                        }
                        child = audio.as_deref().and_then(|p| self.play(p, out));
                    }
                    Answer::Invalid => writeln!(out, "  please answer 1, 0, s, r or q")?,
                }
            };
            if let Some(mut c) = child {
                let _ = c.kill();
                let _ = c.wait();
            }
            let Some(v) = verdict else {
                return Ok(Outcome::Quit { pending: set.pending() });
            };
            let who = if self.annotator.is_empty() { "-" } else { &self.annotator };
            writeln!(journal, "{track}\t{tag_name}\t{}\t{who}", v.token())?;
            journal.flush()?;
            let r = &mut set.records[idx];
            r.verdict = Some(v);
            r.annotator = self.annotator.clone();
        }
        Ok(Outcome::Complete)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tagnoise::tagdata::{ingest_edges, sample_random_subset, SplitFilter};

    fn fixture() -> (LabelMatrix, AnnotationSet) {
        let m = ingest_edges("a\tx\nb\ty\nc\tx\nc\ty\n".as_bytes(), "mem", 2).unwrap();
        let set = sample_random_subset(&m, &[0, 1], 3, SplitFilter::All, 1).unwrap();
        (m, set)
    }

    fn session<'a>(m: &'a LabelMatrix, dir: &Path) -> Session<'a> {
        Session {
            matrix: m,
            journal: dir.join("s.tsv.journal"),
            annotator: "ann".into(),
            audio_dir: None,
            player: None,
        }
    }

    #[test]
    fn quit_and_resume_matches_single_pass() {
        let dir = tempfile::tempdir().unwrap();
        let (m, skeleton) = fixture();
        let answers = ["1", "0", "skip", "1", "0", "1"];

        let mut whole = skeleton.clone();
        let s = session(&m, &dir.path().join("whole"));
        std::fs::create_dir(dir.path().join("whole")).unwrap();
        let mut input = answers.join("\n").into_bytes();
        input.push(b'\n');
        assert_eq!(s.run(&mut whole, &mut input.as_slice(), &mut Vec::new()).unwrap(), Outcome::Complete);

        let s = session(&m, dir.path());
        let mut first = skeleton.clone();
        let input = "1\n0\nq\n";
        assert_eq!(
            s.run(&mut first, &mut input.as_bytes(), &mut Vec::new()).unwrap(),
            Outcome::Quit { pending: 4 }
        );
        let mut resumed = skeleton.clone();
        assert_eq!(replay(&mut resumed, &m, &read_journal(&s.journal).unwrap()), 2);
        let mut prompts = Vec::new();
        let rest = answers[2..].join("\n");
        assert_eq!(s.run(&mut resumed, &mut rest.as_bytes(), &mut prompts).unwrap(), Outcome::Complete);
        assert_eq!(String::from_utf8(prompts).unwrap().matches("does the tag apply").count(), 4);
        assert_eq!(resumed, whole);
    }

    #[test]
    fn invalid_answers_reprompt_and_eof_quits() {
        let dir = tempfile::tempdir().unwrap();
        let (m, mut set) = fixture();
        let s = session(&m, dir.path());
        let mut out = Vec::new();
        let outcome = s.run(&mut set, &mut "maybe\n1\n".as_bytes(), &mut out).unwrap();
        assert_eq!(outcome, Outcome::Quit { pending: 5 });
        assert!(String::from_utf8(out).unwrap().contains("please answer"));
    }

    #[test]
    fn corrupt_journal_explains_recovery() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j");
        std::fs::write(&p, format!("{JOURNAL_HEADER}\na\tx\t1\tann\nb\ty\tmaybe\tann\n")).unwrap();
        let err = read_journal(&p).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("Delete line 3"), "{err}");
    }
}
