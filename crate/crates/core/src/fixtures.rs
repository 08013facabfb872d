//! Synthetic manifest generators with the cardinalities of the FERET-,
//! FRGCv2- and SMDD-derived datasets. Only metadata is generated; paths point
//! at images that do not exist.

use crate::manifest::{Label, Manifest, ManifestEntry, Source, Tool, Variant};

pub const PROCESSING_VARIANTS: [Variant; 3] = [Variant::Ps300, Variant::Ps600, Variant::Resized];
pub const MORPH_TOOLS: [Tool; 4] = [Tool::Facefusion, Tool::Facemorpher, Tool::Opencv, Tool::Ubo];

/// A landmark-morph dataset: every bona fide image and every morph exists in
/// each processing variant, and every morph pair is produced by each tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LandmarkDataset {
    pub source: Source,
    pub subjects: usize,
    pub bonafide_images: usize,
    pub morph_pairs: usize,
}

impl LandmarkDataset {
    /// 529 subjects, 529 bona fide images, 529 morph pairs.
    pub const FERET: LandmarkDataset = LandmarkDataset {
        source: Source::Feret,
        subjects: 529,
        bonafide_images: 529,
        morph_pairs: 529,
    };

    /// 533 subjects, 984 bona fide images, 964 morph pairs.
    pub const FRGC: LandmarkDataset = LandmarkDataset {
        source: Source::Frgc,
        subjects: 533,
        bonafide_images: 984,
        morph_pairs: 964,
    };

    pub fn expected_bonafide(&self) -> usize {
        self.bonafide_images * PROCESSING_VARIANTS.len()
    }

    pub fn expected_morphs(&self) -> usize {
        self.morph_pairs * MORPH_TOOLS.len() * PROCESSING_VARIANTS.len()
    }

    pub fn generate(&self) -> Manifest {
        assert!(self.subjects >= 2, "morph pairs need at least two subjects");
        let src = self.source.as_str();
        let subject = |i: usize| format!("{src}-s{:04}", i % self.subjects);
        let mut entries = Vec::with_capacity(self.expected_bonafide() + self.expected_morphs());
        for img in 0..self.bonafide_images {
            for variant in PROCESSING_VARIANTS {
                entries.push(ManifestEntry {
                    sample_id: format!("{src}-bf-{img:04}-{variant}"),
                    path: format!("{src}/bonafide/{variant}/{img:04}.png"),
                    label: Label::Bonafide,
                    source: self.source,
                    variant,
                    tool: Tool::None,
                    subjects: vec![subject(img)],
                });
            }
        }
        for pair in 0..self.morph_pairs {
            for tool in MORPH_TOOLS {
                for variant in PROCESSING_VARIANTS {
                    entries.push(ManifestEntry {
                        sample_id: format!("{src}-m-{pair:04}-{tool}-{variant}"),
                        path: format!("{src}/morph/{tool}/{variant}/{pair:04}.png"),
                        label: Label::Morph,
                        source: self.source,
                        variant,
                        tool,
                        subjects: vec![subject(pair), subject(pair + 1)],
                    });
                }
            }
        }
        Manifest::new(
            entries,
            vec![format!(
                "fixture: {src} subjects={} bonafide_images={} morph_pairs={}",
                self.subjects, self.bonafide_images, self.morph_pairs
            )],
        )
    }
}

/// Fully synthetic dataset. Bona fide and morph images carry no subject ids
/// and morphs are attributed to the GAN generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticDataset {
    pub bonafide: usize,
    pub morphs: usize,
}

impl SyntheticDataset {
    pub const SMDD: SyntheticDataset = SyntheticDataset {
        bonafide: 25_000,
        morphs: 15_000,
    };

    pub fn generate(&self) -> Manifest {
        let bona = (0..self.bonafide).map(|i| ManifestEntry {
            sample_id: format!("smdd-bf-{i:05}"),
            path: format!("smdd/bonafide/{i:05}.png"),
            label: Label::Bonafide,
            source: Source::Smdd,
            variant: Variant::Synthetic,
            tool: Tool::None,
            subjects: Vec::new(),
        });
        let morphs = (0..self.morphs).map(|i| ManifestEntry {
            sample_id: format!("smdd-m-{i:05}"),
            path: format!("smdd/morph/{i:05}.png"),
            label: Label::Morph,
            source: Source::Smdd,
            variant: Variant::Synthetic,
            tool: Tool::Gan,
            subjects: Vec::new(),
        });
        Manifest::new(
            bona.chain(morphs).collect(),
            vec![format!(
                "fixture: smdd bonafide={} morphs={}",
                self.bonafide, self.morphs
            )],
        )
    }
}

pub fn feret() -> Manifest {
    LandmarkDataset::FERET.generate()
}

pub fn frgc() -> Manifest {
    LandmarkDataset::FRGC.generate()
}

pub fn smdd() -> Manifest {
    SyntheticDataset::SMDD.generate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::validate_manifest;

    #[test]
    fn small_fixtures_are_valid() {
        let m = LandmarkDataset {
            source: Source::Other,
            subjects: 3,
            bonafide_images: 4,
            morph_pairs: 5,
        }
        .generate();
        assert!(validate_manifest(&m).is_valid());
        assert_eq!(m.count_label(Label::Bonafide), 12);
        assert_eq!(m.count_label(Label::Morph), 60);
        let s = SyntheticDataset {
            bonafide: 7,
            morphs: 3,
        }
        .generate();
        assert!(validate_manifest(&s).is_valid());
        assert_eq!(s.len(), 10);
    }
}
