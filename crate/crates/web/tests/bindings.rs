//! The exported functions called natively.

use emorec_web::{mel_filterbank, Utterance};

#[test]
fn filterbank_is_dense_and_peaks_at_one() {
    let w = mel_filterbank(26, 512, 16_000, 0.0, 8_000.0).unwrap();
    assert_eq!(w.len(), 26 * 257);
    for row in w.chunks(257) {
        let peak = row.iter().copied().fold(0.0, f64::max);
        assert_eq!(peak, 1.0);
        assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
    let err = mel_filterbank(26, 500, 16_000, 0.0, 8_000.0).unwrap_err();
    assert!(err.contains("power of two"), "{err}");
}

#[test]
fn utterance_tracks_share_the_frame_axis() {
    let u = Utterance::new("sadness", "male", 3, 1.0).unwrap();
    assert_eq!(u.samples().len(), 16_000);
    assert_eq!(u.mfcc_dim(), 39);
    assert_eq!(u.mfcc().len(), u.num_frames() * 39);
    assert_eq!(u.log_energy().len(), u.num_frames());
    let pitch = u.pitch_hz();
    assert_eq!(pitch.len(), u.num_frames());
    let voiced: Vec<f64> = pitch.iter().copied().filter(|p| !p.is_nan()).collect();
    assert!(!voiced.is_empty());
    assert!(voiced.iter().all(|&p| (60.0..=400.0).contains(&p)));

    let again = Utterance::new("sadness", "male", 3, 1.0).unwrap();
    assert_eq!(u.mfcc(), again.mfcc());
}

#[test]
fn contour_is_smooth_and_validated() {
    let u = Utterance::new("surprise", "female", 8, 1.0).unwrap();
    let c = u.pitch_contour(5, 8.0).unwrap();
    assert_eq!(c.len(), u.num_frames());
    assert!(c.iter().all(|p| p.is_finite() && *p > 0.0));
    assert!(u.pitch_contour(4, 8.0).is_err());
    assert!(u.pitch_contour(5, 0.0).is_err());
    assert!(Utterance::new("boredom", "male", 1, 1.0).is_err());
    assert!(Utterance::new("anger", "robot", 1, 1.0).is_err());
}
