//! Native runs of the browser bindings. Only success paths: constructing a
//! `JsError` needs a JavaScript host.

use genattr::train::{encode_generator, weight_init};
use genattr::ImageShape;
use genattr_wasm::Demo;

#[test]
fn sample_compress_attribute() {
    let mut demo = Demo::new(1, 2).unwrap();
    assert_eq!((demo.width(), demo.height()), (28, 28));
    let clean = demo.sample(0, 5).unwrap();
    assert_eq!(clean.len(), 28 * 28 * 4);
    assert_eq!(clean, demo.sample(0, 5).unwrap());

    let q30 = demo.compress(30).unwrap();
    assert_ne!(q30, clean);
    assert_eq!(demo.compress(100).unwrap(), clean);

    let a = demo.attribute(3, 300, 0).unwrap();
    assert_eq!(a.source(), 0);
    assert_eq!(a.chosen(), 0);
    assert!(a.pair_score() > 0.0);
    assert_eq!(a.scores().len(), 2);
    assert!(a.losses()[0] < a.losses()[1]);
    assert_eq!(a.reconstruction(1).len(), clean.len());
}

#[test]
fn roc_sweep_is_a_curve() {
    let demo = Demo::new(3, 4).unwrap();
    let r = demo.roc(3, 90, 2, 100, 7).unwrap();
    let (fpr, tpr) = (r.fpr(), r.tpr());
    assert_eq!(fpr.len(), tpr.len());
    assert_eq!((fpr[0], tpr[0]), (0.0, 0.0));
    assert_eq!((fpr[fpr.len() - 1], tpr[tpr.len() - 1]), (1.0, 1.0));
    assert!((0.0..=1.0).contains(&r.auc()));
}

#[test]
fn loaded_generator_replaces_a_slot() {
    let mut demo = Demo::new(1, 2).unwrap();
    let gen = weight_init(&[8, 16, 784], 9).unwrap().with_output_shape(ImageShape::MNIST).unwrap().with_id("small");
    let info = demo.load_generator(1, &encode_generator(&gen, None)).unwrap();
    assert!(info.starts_with("small: 8 -> 16 -> 784"));
    // Slot 0 is rebuilt with a matching latent width.
    assert!(demo.describe(0).contains("8 -> 16 -> 784"));
    demo.sample(1, 0).unwrap();
    assert_eq!(demo.attribute(2, 200, 0).unwrap().chosen(), 1);
}
