//! Memo archives: a zip with the comment as HTML, its anchored viewpoint
//! and every attached result.
//!
//! ```text
//! comment.html
//! anchor.json
//! attachments/01-<job>/reference.png
//! attachments/01-<job>/syn.png
//! attachments/01-<job>/seg.png
//! attachments/01-<job>/provenance.json
//! attachments/02-<job>/...
//! ```
//!
//! Entries are stored uncompressed with a fixed timestamp, so equal memos
//! give equal bytes.

use std::collections::HashSet;
use std::io::{Cursor, Read, Write};

use memovis_core::compositor::{PROVENANCE_FILE, REFERENCE_FILE, SEG_FILE, SYN_FILE};
use memovis_core::{MaskImage, RgbImage, Viewpoint};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

pub const HTML_FILE: &str = "comment.html";
pub const ANCHOR_FILE: &str = "anchor.json";
pub const MAX_ATTACHMENTS: usize = 999;
pub const MAX_ENTRY_BYTES: u64 = 64 << 20;
pub const MAX_TOTAL_BYTES: u64 = 1 << 30;

const ARTICLE_OPEN: &str = "<article class=\"comment\">\n";
const ARTICLE_CLOSE: &str = "\n</article>\n";

#[derive(Debug, Error)]
pub enum MemoError {
    #[error("malformed memo: {0}")]
    Malformed(String),
    #[error("memo exceeds size limits: {0}")]
    TooLarge(String),
    #[error("zip: {0}")]
    Zip(#[from] zip::result::ZipError),
    #[error("memo i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn malformed(m: impl Into<String>) -> MemoError {
    MemoError::Malformed(m.into())
}

/// Tags kept in comment bodies.
const ALLOWED_TAGS: &[&str] = &[
    "a", "b", "blockquote", "br", "code", "em", "h1", "h2", "h3", "h4", "i", "li", "ol", "p", "pre",
    "s", "span", "strong", "u", "ul",
];

/// Reduces comment HTML to the portable subset.
pub fn sanitize_html(html: &str) -> String {
    ammonia::Builder::new()
        .tags(ALLOWED_TAGS.iter().copied().collect::<HashSet<_>>())
        .clean(html)
        .to_string()
}

/// Text content of comment HTML, used as the generation prompt.
pub fn plain_text(html: &str) -> String {
    let text = ammonia::Builder::empty().clean(html).to_string();
    let text = text
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&nbsp;", " ")
        .replace("&quot;", "\"")
        .replace("&amp;", "&");
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorRecord {
    pub comment_id: String,
    pub revision: u64,
    pub viewpoint: Option<Viewpoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoAttachment {
    pub job: String,
    pub reference: Vec<u8>,
    pub syn: Vec<u8>,
    pub seg: Vec<u8>,
    pub provenance: Vec<u8>,
}

impl MemoAttachment {
    fn files(&self) -> [(&'static str, &[u8]); 4] {
        [
            (REFERENCE_FILE, &self.reference),
            (SYN_FILE, &self.syn),
            (SEG_FILE, &self.seg),
            (PROVENANCE_FILE, &self.provenance),
        ]
    }

    fn validate(&self) -> Result<(), MemoError> {
        let bad = |f: &str, e: &dyn std::fmt::Display| malformed(format!("{}/{f}: {e}", self.job));
        let r = RgbImage::from_png(&self.reference).map_err(|e| bad(REFERENCE_FILE, &e))?;
        let s = RgbImage::from_png(&self.syn).map_err(|e| bad(SYN_FILE, &e))?;
        let m = MaskImage::from_png(&self.seg).map_err(|e| bad(SEG_FILE, &e))?;
        if r.dims() != s.dims() || r.dims() != m.dims() {
            return Err(malformed(format!("{}: image sizes differ", self.job)));
        }
        let p: serde_json::Value =
            serde_json::from_slice(&self.provenance).map_err(|e| bad(PROVENANCE_FILE, &e))?;
        if !p.get("kind").is_some_and(|k| k.is_string()) {
            return Err(bad(PROVENANCE_FILE, &"missing kind"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Memo {
    pub anchor: AnchorRecord,
    /// Sanitized comment HTML.
    pub body: String,
    pub attachments: Vec<MemoAttachment>,
}

fn attachment_dir(i: usize, job: &str) -> String {
    format!("attachments/{:02}-{job}", i + 1)
}

impl Memo {
    /// The standalone HTML page for the comment.
    pub fn html(&self) -> String {
        let mut out = String::from("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
        out.push_str(&format!("<title>Comment {}</title>\n</head>\n<body>\n", self.anchor.comment_id));
        out.push_str(ARTICLE_OPEN);
        out.push_str(&self.body);
        out.push_str(ARTICLE_CLOSE);
        for (i, a) in self.attachments.iter().enumerate() {
            out.push_str(&format!(
                "<figure><img src=\"{}/{REFERENCE_FILE}\" alt=\"reference image {}\"></figure>\n",
                attachment_dir(i, &a.job),
                i + 1
            ));
        }
        out.push_str("</body>\n</html>\n");
        out
    }

    pub fn to_zip(&self) -> Result<Vec<u8>, MemoError> {
        if self.attachments.len() > MAX_ATTACHMENTS {
            return Err(MemoError::TooLarge(format!("{} attachments", self.attachments.len())));
        }
        let options = SimpleFileOptions::default()
            .compression_method(CompressionMethod::Stored)
            .last_modified_time(DateTime::default())
            .unix_permissions(0o644);
        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        zip.start_file(HTML_FILE, options)?;
        zip.write_all(self.html().as_bytes())?;
        zip.start_file(ANCHOR_FILE, options)?;
        let anchor = serde_json::to_vec_pretty(&self.anchor).expect("anchor serializes");
        zip.write_all(&anchor)?;
        for (i, a) in self.attachments.iter().enumerate() {
            let dir = attachment_dir(i, &a.job);
            for (name, bytes) in a.files() {
                zip.start_file(format!("{dir}/{name}"), options)?;
                zip.write_all(bytes)?;
            }
        }
        Ok(zip.finish()?.into_inner())
    }

    /// Strict reader for archives produced by [`Memo::to_zip`].
    pub fn from_zip(bytes: &[u8]) -> Result<Self, MemoError> {
        let mut archive = ZipArchive::new(Cursor::new(bytes))?;
        let n = archive.len();
        if n < 2 || (n - 2) % 4 != 0 || (n - 2) / 4 > MAX_ATTACHMENTS {
            return Err(malformed(format!("{n} entries")));
        }
        let mut total = 0u64;
        let mut entry = |i: usize| -> Result<(String, Vec<u8>), MemoError> {
            let file = archive.by_index(i)?;
            let name = file.name()?.into_owned();
            if file.size() > MAX_ENTRY_BYTES {
                return Err(MemoError::TooLarge(format!("{name}: {} bytes", file.size())));
            }
            let mut data = Vec::new();
            file.take(MAX_ENTRY_BYTES + 1).read_to_end(&mut data)?;
            if data.len() as u64 > MAX_ENTRY_BYTES {
                return Err(MemoError::TooLarge(name));
            }
            total += data.len() as u64;
            if total > MAX_TOTAL_BYTES {
                return Err(MemoError::TooLarge("archive".into()));
            }
            Ok((name, data))
        };
        let expect = |got: &str, want: &str| {
            if got == want {
                Ok(())
            } else {
                Err(malformed(format!("expected entry {want}, found {got}")))
            }
        };

        let (name, html) = entry(0)?;
        expect(&name, HTML_FILE)?;
        let html = String::from_utf8(html).map_err(|_| malformed("comment.html is not UTF-8"))?;
        let (name, anchor) = entry(1)?;
        expect(&name, ANCHOR_FILE)?;
        let anchor: AnchorRecord =
            serde_json::from_slice(&anchor).map_err(|e| malformed(format!("{ANCHOR_FILE}: {e}")))?;
        if let Some(v) = &anchor.viewpoint {
            v.validate().map_err(|e| malformed(format!("{ANCHOR_FILE}: {e}")))?;
        }

        let mut attachments = Vec::new();
        for i in 0..(n - 2) / 4 {
            let (first, reference) = entry(2 + 4 * i)?;
            let prefix = format!("attachments/{:02}-", i + 1);
            let job = first
                .strip_prefix(&prefix)
                .and_then(|rest| rest.strip_suffix(&format!("/{REFERENCE_FILE}")))
                .filter(|job| !job.is_empty() && job.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-'))
                .ok_or_else(|| malformed(format!("unexpected entry {first}")))?
                .to_string();
            let dir = attachment_dir(i, &job);
            let mut rest = Vec::new();
            for (k, file) in [SYN_FILE, SEG_FILE, PROVENANCE_FILE].into_iter().enumerate() {
                let (name, data) = entry(3 + 4 * i + k)?;
                expect(&name, &format!("{dir}/{file}"))?;
                rest.push(data);
            }
            let [syn, seg, provenance]: [Vec<u8>; 3] = rest.try_into().expect("three files");
            let a = MemoAttachment {
                job,
                reference,
                syn,
                seg,
                provenance,
            };
            a.validate()?;
            attachments.push(a);
        }

        let start = html
            .find(ARTICLE_OPEN)
            .ok_or_else(|| malformed("comment.html has no comment article"))?
            + ARTICLE_OPEN.len();
        let len = html[start..]
            .find(ARTICLE_CLOSE)
            .ok_or_else(|| malformed("comment.html article is not closed"))?;
        let memo = Memo {
            anchor,
            body: html[start..start + len].to_string(),
            attachments,
        };
        if memo.html() != html {
            return Err(malformed("comment.html does not match its memo"));
        }
        Ok(memo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitizer_keeps_the_portable_subset() {
        let html = sanitize_html(
            "<p onclick=\"x()\">Make the <b>lamp</b> <script>alert(1)</script>taller</p><img src=x>",
        );
        assert_eq!(html, "<p>Make the <b>lamp</b> taller</p>");
        assert_eq!(plain_text("<p>Tom &amp; Jerry&nbsp;<i>sofa</i></p>\n<p>a &lt; b</p>"), "Tom & Jerry sofa a < b");
    }

    fn png(w: u32, h: u32) -> (Vec<u8>, Vec<u8>) {
        (
            RgbImage::filled(w, h, [1, 2, 3]).to_png().unwrap(),
            MaskImage::from_fn(w, h, |r, c| r < c).to_png().unwrap(),
        )
    }

    fn memo(n: usize) -> Memo {
        let (rgb, mask) = png(6, 4);
        Memo {
            anchor: AnchorRecord {
                comment_id: "c1".into(),
                revision: 3,
                viewpoint: Some(Viewpoint::new(0.5, 1.25, 2.0, [0.0, 0.1, -0.2])),
            },
            body: "<p>a <b>wider</b> desk</p>".into(),
            attachments: (0..n)
                .map(|i| MemoAttachment {
                    job: format!("job{i}"),
                    reference: rgb.clone(),
                    syn: rgb.clone(),
                    seg: mask.clone(),
                    provenance: br#"{"kind":"text-scribble"}"#.to_vec(),
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for n in [0, 1, 3] {
            let m = memo(n);
            let bytes = m.to_zip().unwrap();
            assert_eq!(bytes, m.to_zip().unwrap());
            let back = Memo::from_zip(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_zip().unwrap(), bytes);
        }
    }

    #[test]
    fn listing_order_is_fixed() {
        let bytes = memo(2).to_zip().unwrap();
        let mut z = ZipArchive::new(Cursor::new(&bytes[..])).unwrap();
        let names: Vec<String> = (0..z.len()).map(|i| z.by_index(i).unwrap().name().unwrap().into_owned()).collect();
        assert_eq!(
            names,
            [
                "comment.html",
                "anchor.json",
                "attachments/01-job0/reference.png",
                "attachments/01-job0/syn.png",
                "attachments/01-job0/seg.png",
                "attachments/01-job0/provenance.json",
                "attachments/02-job1/reference.png",
                "attachments/02-job1/syn.png",
                "attachments/02-job1/seg.png",
                "attachments/02-job1/provenance.json",
            ]
        );
    }

    #[test]
    fn tampered_archives_are_rejected() {
        let mut m = memo(1);
        m.attachments[0].seg = png(3, 3).1;
        assert!(Memo::from_zip(&m.to_zip().unwrap()).is_err());
        let mut m = memo(1);
        m.attachments[0].provenance = b"{}".to_vec();
        assert!(Memo::from_zip(&m.to_zip().unwrap()).is_err());
        let mut m = memo(1);
        m.attachments[0].job = "../x".into();
        assert!(Memo::from_zip(&m.to_zip().unwrap()).is_err());
        assert!(Memo::from_zip(b"PK\x03\x04junk").is_err());
        assert!(Memo::from_zip(&[]).is_err());
    }
}
