//! Reader and writer for the task XML: `<text id=…>` elements containing
//! `<word id=…>surface</word>` children.

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{CorpusError, PunInstance};

fn xml_err(reader: &Reader<&[u8]>, message: impl ToString) -> CorpusError {
    CorpusError::Xml {
        position: reader.buffer_position(),
        message: message.to_string(),
    }
}

/// Parse the corpus XML. Token order and ids are preserved verbatim.
/// Returns the instances plus a warning per empty `<text>` element.
pub fn parse_semeval_xml(xml: &str) -> Result<(Vec<PunInstance>, Vec<String>), CorpusError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);

    let mut instances = Vec::new();
    let mut warnings = Vec::new();
    let mut current: Option<PunInstance> = None;
    let mut word_id: Option<String> = None;
    let mut word_text = String::new();

    loop {
        match reader.read_event() {
            Err(e) => return Err(xml_err(&reader, e)),
            Ok(Event::Eof) => break,
            Ok(Event::Start(start)) => match start.name().as_ref() {
                b"text" => {
                    let id = attr_value(&reader, &start, b"id")?;
                    current = Some(PunInstance {
                        text_id: id,
                        tokens: Vec::new(),
                        gold_pun_token: None,
                        gold_sense_keys: None,
                    });
                }
                b"word" => {
                    let inst = current
                        .as_ref()
                        .ok_or_else(|| xml_err(&reader, "<word> outside of <text>"))?;
                    let id = attr_value(&reader, &start, b"id")?;
                    if !id.starts_with(&format!("{}_", inst.text_id)) {
                        return Err(xml_err(
                            &reader,
                            format!(
                                "word id `{id}` is not prefixed by its text id `{}`",
                                inst.text_id
                            ),
                        ));
                    }
                    word_id = Some(id);
                    word_text.clear();
                }
                _ => {}
            },
            Ok(Event::Text(t)) => {
                if word_id.is_some() {
                    let piece = t.unescape().map_err(|e| xml_err(&reader, e))?;
                    word_text.push_str(&piece);
                }
            }
            Ok(Event::End(end)) => match end.name().as_ref() {
                b"word" => {
                    let id = word_id
                        .take()
                        .ok_or_else(|| xml_err(&reader, "</word> without <word>"))?;
                    let inst = current
                        .as_mut()
                        .ok_or_else(|| xml_err(&reader, "</word> outside of <text>"))?;
                    inst.tokens.push((id, std::mem::take(&mut word_text)));
                }
                b"text" => {
                    let inst = current
                        .take()
                        .ok_or_else(|| xml_err(&reader, "</text> without <text>"))?;
                    if inst.tokens.is_empty() {
                        warnings.push(format!("text `{}` has no words", inst.text_id));
                    }
                    instances.push(inst);
                }
                _ => {}
            },
            Ok(_) => {}
        }
    }
    if current.is_some() {
        return Err(xml_err(&reader, "unclosed <text> element"));
    }
    Ok((instances, warnings))
}

fn attr_value(
    reader: &Reader<&[u8]>,
    start: &quick_xml::events::BytesStart,
    name: &[u8],
) -> Result<String, CorpusError> {
    for attr in start.attributes() {
        let attr = attr.map_err(|e| xml_err(reader, e))?;
        if attr.key.as_ref() == name {
            let value = attr
                .decode_and_unescape_value(reader.decoder())
                .map_err(|e| xml_err(reader, e))?;
            return Ok(value.into_owned());
        }
    }
    Err(xml_err(
        reader,
        format!(
            "<{}> missing `{}` attribute",
            String::from_utf8_lossy(start.name().as_ref()),
            String::from_utf8_lossy(name)
        ),
    ))
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Inverse of [`parse_semeval_xml`], used for fixtures and synthetic data.
pub fn write_semeval_xml(instances: &[PunInstance]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<corpus>\n");
    for inst in instances {
        out.push_str(&format!("<text id=\"{}\">\n", escape_xml(&inst.text_id)));
        for (id, surface) in &inst.tokens {
            out.push_str(&format!(
                "<word id=\"{}\">{}</word>\n",
                escape_xml(id),
                escape_xml(surface)
            ));
        }
        out.push_str("</text>\n");
    }
    out.push_str("</corpus>\n");
    out
}
