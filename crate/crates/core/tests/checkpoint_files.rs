use std::fs;

use ssw2v_core::corpus::Sentence;
use ssw2v_core::persist::{
    checkpoint_bytes, export_embeddings_to_path, is_checkpoint, load_checkpoint, save_checkpoint, TextEmbeddings,
};
use ssw2v_core::eval::WordVectors;
use ssw2v_core::{Error, StreamModel, TrainerConfig};

fn model() -> StreamModel<f64> {
    let config = TrainerConfig {
        vocab_capacity: 8,
        reservoir_capacity: 50,
        dim: 3,
        log_interval: 0,
        ..TrainerConfig::default()
    };
    let mut m = StreamModel::new(config).unwrap();
    for i in 0..30 {
        m.train_sentence(&Sentence::from_text(&format!("the cat w{} sat on the mat w{}", i % 4, i % 7)));
    }
    m
}

#[test]
fn round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let m = model();
    save_checkpoint(&m, &path).unwrap();
    assert!(is_checkpoint(&path).unwrap());
    let back: StreamModel<f64> = load_checkpoint(&path).unwrap();
    assert_eq!(checkpoint_bytes(&back), checkpoint_bytes(&m));
}

#[test]
fn unwritable_destination_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("no_such_dir").join("model.ckpt");
    assert!(matches!(save_checkpoint(&model(), &path), Err(Error::Io(_))));
    assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Io(_))));
}

#[test]
fn truncated_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let bytes = checkpoint_bytes(&model());
    for cut in [4, 8, 13, bytes.len() / 2, bytes.len() - 1] {
        fs::write(&path, &bytes[..cut]).unwrap();
        let err = load_checkpoint::<f64>(&path).unwrap_err();
        assert!(matches!(err, Error::BadMagic | Error::Corrupt(_)), "cut {cut}: {err:?}");
    }
}

#[test]
fn text_vectors_are_not_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt");
    let m = model();
    export_embeddings_to_path(&m, &path).unwrap();
    assert!(!is_checkpoint(&path).unwrap());
    assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::BadMagic)));

    let text = TextEmbeddings::<f64>::read_path(&path).unwrap();
    assert_eq!(text.len(), m.sketch().len());
    for word in m.ranked_words() {
        assert_eq!(text.vector(&word), m.vector(&word));
    }

    let empty = dir.path().join("empty");
    fs::write(&empty, b"").unwrap();
    assert!(!is_checkpoint(&empty).unwrap());
}
