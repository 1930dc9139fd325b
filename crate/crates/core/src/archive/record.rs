use std::io::Read;

use encoding_rs::Encoding;
use flate2::read::{DeflateDecoder, GzDecoder, MultiGzDecoder, ZlibDecoder};
use sha1::{Digest, Sha1};

use super::{ArchiveError, CdxEntry};

/// Envelope of one archive record: named headers plus the raw block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarcRecord {
    pub version: String,
    pub headers: Vec<(String, String)>,
    pub block: Vec<u8>,
}

impl WarcRecord {
    pub fn header(&self, name: &str) -> Option<&str> {
        find_header(&self.headers, name)
    }
}

/// An archived HTTP response. `body` is the entity exactly as stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        find_header(&self.headers, name)
    }

    /// Body with transfer and content codings removed.
    pub fn decoded_body(&self) -> Result<Vec<u8>, String> {
        let mut body = self.body.clone();
        if self
            .header("transfer-encoding")
            .is_some_and(|v| v.to_ascii_lowercase().contains("chunked"))
        {
            body = dechunk(&body)?;
        }
        if let Some(enc) = self.header("content-encoding") {
            // Codings are listed in the order applied.
            for coding in enc.rsplit(',').map(|c| c.trim().to_ascii_lowercase()) {
                body = match coding.as_str() {
                    "" | "identity" => body,
                    "gzip" | "x-gzip" => inflate(GzDecoder::new(&body[..]))?,
                    "deflate" => {
                        // Servers disagree on zlib-wrapped versus raw deflate.
                        inflate(ZlibDecoder::new(&body[..]))
                            .or_else(|_| inflate(DeflateDecoder::new(&body[..])))?
                    }
                    other => return Err(format!("unsupported content-encoding {other:?}")),
                };
            }
        }
        Ok(body)
    }

    pub fn content_type(&self) -> Option<&str> {
        self.header("content-type")
    }
}

fn find_header<'a>(headers: &'a [(String, String)], name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_str())
}

fn inflate<R: Read>(mut r: R) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    r.read_to_end(&mut out).map_err(|e| e.to_string())?;
    Ok(out)
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Split a header block terminated by a blank line. Accepts bare `\n` line
/// endings as well as `\r\n`.
fn split_head(data: &[u8]) -> Option<(&[u8], &[u8])> {
    let crlf = find_subslice(data, b"\r\n\r\n").map(|i| (i, 4));
    let lf = find_subslice(data, b"\n\n").map(|i| (i, 2));
    let (i, n) = match (crlf, lf) {
        (Some(a), Some(b)) => {
            if a.0 <= b.0 {
                a
            } else {
                b
            }
        }
        (a, b) => a.or(b)?,
    };
    Some((&data[..i], &data[i + n..]))
}

fn parse_header_lines(head: &str) -> (Option<String>, Vec<(String, String)>) {
    let mut lines = head.lines();
    let first = lines.next().map(|l| l.trim().to_string());
    let mut headers: Vec<(String, String)> = Vec::new();
    for line in lines {
        if line.starts_with([' ', '\t']) {
            if let Some(last) = headers.last_mut() {
                last.1.push(' ');
                last.1.push_str(line.trim());
            }
            continue;
        }
        if let Some((k, v)) = line.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    (first, headers)
}

/// Parse an uncompressed record envelope.
pub fn parse_warc_record(data: &[u8]) -> Result<WarcRecord, String> {
    let (head, rest) = split_head(data).ok_or("record header block not terminated")?;
    let head = String::from_utf8_lossy(head);
    let (version, headers) = parse_header_lines(&head);
    let version = version.unwrap_or_default();
    if !version.starts_with("WARC/") {
        return Err(format!("not an archive record (first line {version:?})"));
    }
    let block = match find_header(&headers, "content-length") {
        Some(n) => {
            let n: usize = n
                .parse()
                .map_err(|_| format!("bad Content-Length {n:?}"))?;
            if n > rest.len() {
                return Err(format!("block truncated: {} of {n} bytes", rest.len()));
            }
            rest[..n].to_vec()
        }
        None => rest.to_vec(),
    };
    Ok(WarcRecord {
        version,
        headers,
        block,
    })
}

pub fn parse_http_response(block: &[u8]) -> Result<HttpResponse, String> {
    let (head, body) = split_head(block).ok_or("HTTP header block not terminated")?;
    let head = String::from_utf8_lossy(head);
    let (status_line, headers) = parse_header_lines(&head);
    let status_line = status_line.unwrap_or_default();
    let mut parts = status_line.split_whitespace();
    let proto = parts.next().unwrap_or_default();
    if !proto.starts_with("HTTP/") {
        return Err(format!("bad status line {status_line:?}"));
    }
    let status = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("bad status line {status_line:?}"))?;
    Ok(HttpResponse {
        status,
        headers,
        body: body.to_vec(),
    })
}

fn dechunk(data: &[u8]) -> Result<Vec<u8>, String> {
    let mut out = Vec::with_capacity(data.len());
    let mut pos = 0;
    loop {
        let eol = find_subslice(&data[pos..], b"\n").ok_or("chunk size line not terminated")?;
        let line = String::from_utf8_lossy(&data[pos..pos + eol]);
        let size_txt = line.trim().split(';').next().unwrap_or_default().trim().to_string();
        let size = usize::from_str_radix(&size_txt, 16)
            .map_err(|_| format!("bad chunk size {size_txt:?}"))?;
        pos += eol + 1;
        if size == 0 {
            return Ok(out);
        }
        if pos + size > data.len() {
            return Err("chunk overruns body".into());
        }
        out.extend_from_slice(&data[pos..pos + size]);
        pos += size;
        if data.get(pos) == Some(&b'\r') {
            pos += 1;
        }
        if data.get(pos) == Some(&b'\n') {
            pos += 1;
        }
    }
}

/// Base32 SHA-1 of `payload`, the form used by the archive index.
pub fn payload_digest(payload: &[u8]) -> String {
    data_encoding::BASE32.encode(&Sha1::digest(payload))
}

fn normalize_digest(d: &str) -> String {
    let d = d.trim();
    let d = d
        .split_once(':')
        .filter(|(algo, _)| algo.eq_ignore_ascii_case("sha1"))
        .map_or(d, |(_, v)| v);
    d.to_ascii_uppercase()
}

fn charset_from_content_type(ct: &str) -> Option<&str> {
    ct.split(';').skip(1).find_map(|p| {
        let (k, v) = p.split_once('=')?;
        k.trim()
            .eq_ignore_ascii_case("charset")
            .then(|| v.trim().trim_matches(['"', '\'']))
    })
}

/// `<meta charset=...>` or `<meta http-equiv content="...charset=...">` in
/// the first 4 KiB.
fn charset_from_meta(body: &[u8]) -> Option<&'static Encoding> {
    let head = &body[..body.len().min(4096)];
    let text = String::from_utf8_lossy(head).to_ascii_lowercase();
    let mut from = 0;
    while let Some(i) = text[from..].find("charset") {
        let start = from + i + "charset".len();
        from = start;
        let rest = text[start..].trim_start();
        let Some(rest) = rest.strip_prefix('=') else {
            continue;
        };
        let rest = rest.trim_start().trim_start_matches(['"', '\'']);
        let label: String = rest
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | ':' | '.'))
            .collect();
        if let Some(enc) = Encoding::for_label(label.as_bytes()) {
            return Some(enc);
        }
    }
    None
}

/// Decode body bytes: declared charset (header, then meta tag), then strict
/// UTF-8, then lossy UTF-8.
pub fn decode_text(body: &[u8], content_type: Option<&str>) -> String {
    let declared = content_type
        .and_then(charset_from_content_type)
        .and_then(|l| Encoding::for_label(l.as_bytes()))
        .or_else(|| charset_from_meta(body));
    if let Some(enc) = declared {
        let (text, _, _) = enc.decode(body);
        return text.into_owned();
    }
    match std::str::from_utf8(body) {
        Ok(s) => s.strip_prefix('\u{feff}').unwrap_or(s).to_string(),
        Err(_) => String::from_utf8_lossy(body).into_owned(),
    }
}

/// Decompress one gzip member (or accept an uncompressed record), check the
/// payload digest against the index and return the decoded body text.
pub fn parse_capture_record(member: &[u8], entry: &CdxEntry) -> Result<String, ArchiveError> {
    let rec_err = |message: String| ArchiveError::Record {
        url: entry.url.clone(),
        message,
    };
    let raw = if member.starts_with(&[0x1f, 0x8b]) {
        inflate(MultiGzDecoder::new(member)).map_err(|e| rec_err(format!("gzip: {e}")))?
    } else {
        member.to_vec()
    };
    let record = parse_warc_record(&raw).map_err(rec_err)?;
    if let Some(kind) = record.header("warc-type") {
        if !kind.eq_ignore_ascii_case("response") {
            return Err(rec_err(format!("record type {kind:?} is not a response")));
        }
    }
    let http = parse_http_response(&record.block).map_err(rec_err)?;
    let actual = payload_digest(&http.body);
    let expected = normalize_digest(&entry.digest);
    if actual != expected {
        return Err(ArchiveError::DigestMismatch {
            url: entry.url.clone(),
            expected,
            actual,
        });
    }
    let body = http.decoded_body().map_err(rec_err)?;
    Ok(decode_text(&body, http.content_type()))
}
