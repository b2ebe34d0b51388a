use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::manifest::Codec;

pub fn encode(codec: Codec, raw: &[u8]) -> Vec<u8> {
    match codec {
        Codec::None => raw.to_vec(),
        Codec::Deflate => {
            let mut enc = DeflateEncoder::new(Vec::with_capacity(raw.len() / 2), Compression::fast());
            enc.write_all(raw).expect("writing to a Vec cannot fail");
            enc.finish().expect("writing to a Vec cannot fail")
        }
    }
}

pub fn decode(codec: Codec, encoded: Vec<u8>) -> Result<Vec<u8>, String> {
    match codec {
        Codec::None => Ok(encoded),
        Codec::Deflate => {
            let mut out = Vec::with_capacity(encoded.len() * 2);
            DeflateDecoder::new(encoded.as_slice())
                .read_to_end(&mut out)
                .map_err(|e| format!("deflate: {e}"))?;
            Ok(out)
        }
    }
}
