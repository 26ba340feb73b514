#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "crossbar/image.hpp"
#include "crossbar/rng.hpp"

namespace crossbar {

// Synthetic phantom: one bright perturbed-ellipse tumor per image over a flat
// background, plus distractor blobs of similar intensity that stay out of the
// ground-truth mask, plus Gaussian noise. Stands in for private CT data.
struct PhantomConfig {
    int rows = 296;
    int cols = 296;
    double min_diameter = 10.0;
    double max_diameter = 90.0;
    double background_intensity = 0.40;
    double contrast_min = 0.25;
    double contrast_max = 0.45;
    double noise_sigma = 0.03;
    double axis_ratio_min = 0.60;       // ellipse minor/major lower bound
    double boundary_amplitude = 0.08;   // radial perturbation, fraction of radius
    int distractor_count = 2;
};

std::pair<Image2D, BinaryMask> generate_phantom(const PhantomConfig& config, Rng& rng);

// 8-bit binary portable graymaps (magic P5, maxval 255). Images map
// round(255*v) <-> v/255; masks use {0, 255} strictly.
void write_image(const std::string& path, const Image2D& image);
Image2D read_image(const std::string& path);
void write_mask(const std::string& path, const BinaryMask& mask);
BinaryMask read_mask(const std::string& path);

struct ManifestEntry {
    std::string subject_id;
    std::string image_path;  // as written in the manifest file
    std::string mask_path;
    int fold = 0;
};

// Line-oriented dataset index: a "#version 1" header, then one
// subject<TAB>image<TAB>mask<TAB>fold record per line. Relative paths are
// resolved against the manifest's directory.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::string base_dir;

    static DatasetManifest load(const std::string& path, bool check_paths = true);
    void save(const std::string& path) const;

    std::string image_file(size_t i) const;
    std::string mask_file(size_t i) const;
    std::vector<int> folds() const;
};

// Seeded subject-level split into k folds with sizes differing by at most 1.
// Returns the fold of each subject, aligned with the input order.
std::vector<int> make_folds(const std::vector<std::string>& subject_ids, int k,
                            std::uint64_t seed);

// In-memory dataset: images min-max normalized at load, masks as stored.
struct LabeledImages {
    std::shared_ptr<std::vector<Image2D>> images = std::make_shared<std::vector<Image2D>>();
    std::vector<BinaryMask> masks;
    std::vector<std::string> ids;  // "subject/stem" per image

    size_t size() const { return masks.size(); }
    void add(Image2D image, BinaryMask mask, std::string id);
};

// Loads every manifest entry whose fold is in `folds_to_include`.
LabeledImages load_images(const DatasetManifest& manifest, const std::vector<int>& folds_to_include);

}  // namespace crossbar
