#include "crossbar/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "crossbar/geometry.hpp"

namespace fs = std::filesystem;

namespace crossbar {

namespace {

constexpr int kHarmonics = 4;  // boundary perturbation uses harmonics 2..5

struct Blob {
    double cr, cc;        // center
    double a, b;          // semi-axes, a >= b
    double rot;           // radians
    double amp[kHarmonics];
    double phase[kHarmonics];

    bool contains(double r, double c) const {
        const double dr = r - cr, dc = c - cc;
        const double x = dc * std::cos(rot) + dr * std::sin(rot);
        const double y = -dc * std::sin(rot) + dr * std::cos(rot);
        const double u = std::hypot(x / a, y / b);
        double rho = 1.0;
        if (u > 0.0) {
            const double theta = std::atan2(y / b, x / a);
            for (int k = 0; k < kHarmonics; ++k)
                rho += amp[k] * std::cos((k + 2) * theta + phase[k]);
        }
        return u <= rho;
    }

    double reach() const { return a * (1.0 + max_amp()) + 1.0; }

    double max_amp() const {
        double s = 0.0;
        for (double v : amp) s += std::abs(v);
        return s;
    }
};

Blob sample_blob(double diameter, double axis_ratio_min, double boundary_amplitude, Rng& rng) {
    Blob blob{};
    blob.a = diameter / 2.0;
    blob.b = blob.a * rng.uniform(axis_ratio_min, 1.0);
    blob.rot = rng.uniform(0.0, 3.14159265358979323846);
    for (int k = 0; k < kHarmonics; ++k) {
        blob.amp[k] = boundary_amplitude * rng.uniform(-1.0, 1.0) / kHarmonics;
        blob.phase[k] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    }
    return blob;
}

void paint(Image2D& image, const Blob& blob, float value) {
    const int r0 = std::max(0, static_cast<int>(std::floor(blob.cr - blob.reach())));
    const int r1 = std::min(image.rows - 1, static_cast<int>(std::ceil(blob.cr + blob.reach())));
    const int c0 = std::max(0, static_cast<int>(std::floor(blob.cc - blob.reach())));
    const int c1 = std::min(image.cols - 1, static_cast<int>(std::ceil(blob.cc + blob.reach())));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            if (blob.contains(r, c)) image.at(r, c) = value;
}

}  // namespace

std::pair<Image2D, BinaryMask> generate_phantom(const PhantomConfig& config, Rng& rng) {
    if (config.rows < 1 || config.cols < 1) throw std::invalid_argument("phantom: empty image");
    if (config.min_diameter <= 0 || config.max_diameter < config.min_diameter)
        throw std::invalid_argument("phantom: bad diameter range");
    if (config.contrast_min < 0 || config.contrast_max < config.contrast_min)
        throw std::invalid_argument("phantom: contrast must be >= 0");

    Blob tumor = sample_blob(rng.uniform(config.min_diameter, config.max_diameter),
                             config.axis_ratio_min, config.boundary_amplitude, rng);
    const double margin = tumor.reach() + 1.0;
    if (2.0 * margin >= config.rows || 2.0 * margin >= config.cols)
        throw std::invalid_argument("phantom: tumor diameter does not fit the image");
    tumor.cr = rng.uniform(margin, config.rows - 1 - margin);
    tumor.cc = rng.uniform(margin, config.cols - 1 - margin);

    // Hard-rendered support; the mask is exactly the painted region (largest
    // component, so stray pixels from extreme perturbations never detach).
    BinaryMask support(config.rows, config.cols);
    for (int r = 0; r < config.rows; ++r)
        for (int c = 0; c < config.cols; ++c)
            if (tumor.contains(r, c)) support.at(r, c) = 1;
    BinaryMask mask = largest_component_mask(support);
    if (mask.foreground_count() == 0)
        throw std::logic_error("phantom: rendered an empty tumor");

    Image2D image(config.rows, config.cols);
    const float base = static_cast<float>(config.background_intensity);
    std::fill(image.pix.begin(), image.pix.end(), base);
    const double contrast = rng.uniform(config.contrast_min, config.contrast_max);
    for (size_t i = 0; i < mask.v.size(); ++i)
        if (mask.v[i]) image.pix[i] = static_cast<float>(config.background_intensity + contrast);

    // Distractors: smaller blobs at a similar (slightly lower) intensity,
    // deliberately excluded from the mask.
    for (int d = 0; d < config.distractor_count; ++d) {
        Blob blob = sample_blob(rng.uniform(4.0, 12.0), config.axis_ratio_min,
                                config.boundary_amplitude, rng);
        const double level = config.background_intensity + contrast * rng.uniform(0.55, 0.90);
        bool placed = false;
        for (int attempt = 0; attempt < 30 && !placed; ++attempt) {
            const double m = blob.reach() + 1.0;
            if (2.0 * m >= config.rows || 2.0 * m >= config.cols) break;
            blob.cr = rng.uniform(m, config.rows - 1 - m);
            blob.cc = rng.uniform(m, config.cols - 1 - m);
            const double gap = std::hypot(blob.cr - tumor.cr, blob.cc - tumor.cc);
            placed = gap > tumor.reach() + blob.reach() + 4.0;
        }
        if (placed) paint(image, blob, static_cast<float>(level));
    }

    if (config.noise_sigma > 0.0)
        for (float& p : image.pix)
            p += static_cast<float>(rng.normal(0.0, config.noise_sigma));
    normalize_minmax(image);
    return {std::move(image), std::move(mask)};
}

// ---------------------------------------------------------------------------
// P5 portable graymaps

namespace {

void write_pgm(const std::string& path, int rows, int cols, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << cols << ' ' << rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

// Header tokens may be separated by whitespace and '#' comment lines.
int next_pgm_token(std::istream& in, const std::string& path) {
    int ch;
    while ((ch = in.get()) != EOF) {
        if (std::isspace(ch)) continue;
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        break;
    }
    if (ch == EOF || !std::isdigit(ch))
        throw std::runtime_error("read_pgm: bad header in " + path);
    long value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        if (value > 1000000) throw std::runtime_error("read_pgm: bad header in " + path);
        ch = in.get();
    }
    if (ch != EOF) in.unget();
    return static_cast<int>(value);
}

std::vector<std::uint8_t> read_pgm(const std::string& path, int& rows, int& cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P' || m1 != '5')
        throw std::runtime_error("read_pgm: bad magic in " + path + " (expected P5)");
    cols = next_pgm_token(in, path);
    rows = next_pgm_token(in, path);
    const int maxval = next_pgm_token(in, path);
    if (maxval != 255)
        throw std::runtime_error("read_pgm: unsupported maxval " + std::to_string(maxval) + " in " +
                                 path);
    in.get();  // the single whitespace byte before the payload
    std::vector<std::uint8_t> bytes(static_cast<size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw std::runtime_error("read_pgm: truncated data in " + path);
    return bytes;
}

}  // namespace

void write_image(const std::string& path, const Image2D& image) {
    std::vector<std::uint8_t> bytes(image.pix.size());
    for (size_t i = 0; i < bytes.size(); ++i) {
        const float v = std::clamp(image.pix[i], 0.0f, 1.0f);
        bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    write_pgm(path, image.rows, image.cols, bytes);
}

Image2D read_image(const std::string& path) {
    int rows = 0, cols = 0;
    const auto bytes = read_pgm(path, rows, cols);
    Image2D img(rows, cols);
    for (size_t i = 0; i < bytes.size(); ++i) img.pix[i] = static_cast<float>(bytes[i]) / 255.0f;
    return img;
}

void write_mask(const std::string& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> bytes(mask.v.size());
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.v[i] ? 255 : 0;
    write_pgm(path, mask.rows, mask.cols, bytes);
}

BinaryMask read_mask(const std::string& path) {
    int rows = 0, cols = 0;
    const auto bytes = read_pgm(path, rows, cols);
    BinaryMask mask(rows, cols);
    for (size_t i = 0; i < bytes.size(); ++i) {
        if (bytes[i] != 0 && bytes[i] != 255)
            throw std::runtime_error("read_mask: non-binary mask value " +
                                     std::to_string(bytes[i]) + " in " + path);
        mask.v[i] = bytes[i] ? 1 : 0;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Manifests and folds

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / p).string();
}

}  // namespace

DatasetManifest DatasetManifest::load(const std::string& path, bool check_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();

    std::string line;
    if (!std::getline(in, line) || line != "#version 1")
        throw std::runtime_error("manifest: missing '#version 1' header in " + path);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::string fold_str;
        if (!std::getline(ls, e.subject_id, '\t') || !std::getline(ls, e.image_path, '\t') ||
            !std::getline(ls, e.mask_path, '\t') || !std::getline(ls, fold_str))
            throw std::runtime_error("manifest: malformed line " + std::to_string(lineno) + " in " +
                                     path);
        try {
            e.fold = std::stoi(fold_str);
        } catch (const std::exception&) {
            throw std::runtime_error("manifest: bad fold on line " + std::to_string(lineno) +
                                     " in " + path);
        }
        if (e.fold < 0)
            throw std::runtime_error("manifest: bad fold on line " + std::to_string(lineno) +
                                     " in " + path);
        m.entries.push_back(std::move(e));
    }
    if (check_paths) {
        for (size_t i = 0; i < m.entries.size(); ++i) {
            for (const std::string& f : {m.image_file(i), m.mask_file(i)})
                if (!fs::exists(f)) throw std::runtime_error("manifest: missing file " + f);
        }
    }
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("manifest: cannot open " + path + " for writing");
    out << "#version 1\n";
    for (const auto& e : entries)
        out << e.subject_id << '\t' << e.image_path << '\t' << e.mask_path << '\t' << e.fold
            << '\n';
    if (!out) throw std::runtime_error("manifest: write failed for " + path);
}

std::string DatasetManifest::image_file(size_t i) const {
    return resolve(base_dir, entries[i].image_path);
}

std::string DatasetManifest::mask_file(size_t i) const {
    return resolve(base_dir, entries[i].mask_path);
}

std::vector<int> DatasetManifest::folds() const {
    std::set<int> f;
    for (const auto& e : entries) f.insert(e.fold);
    return {f.begin(), f.end()};
}

std::vector<int> make_folds(const std::vector<std::string>& subject_ids, int k,
                            std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("make_folds: need k >= 1");
    std::set<std::string> unique(subject_ids.begin(), subject_ids.end());
    if (unique.size() != subject_ids.size())
        throw std::invalid_argument("make_folds: duplicate subject id");
    if (static_cast<int>(subject_ids.size()) < k)
        throw std::invalid_argument("make_folds: fewer subjects (" +
                                    std::to_string(subject_ids.size()) + ") than folds (" +
                                    std::to_string(k) + ")");
    std::vector<std::uint32_t> order(subject_ids.size());
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> fold(subject_ids.size());
    for (size_t p = 0; p < order.size(); ++p) fold[order[p]] = static_cast<int>(p % k);
    return fold;
}

void LabeledImages::add(Image2D image, BinaryMask mask, std::string id) {
    if (mask.rows != image.rows || mask.cols != image.cols)
        throw std::invalid_argument("LabeledImages: image/mask dims differ for " + id);
    images->push_back(std::move(image));
    masks.push_back(std::move(mask));
    ids.push_back(std::move(id));
}

LabeledImages load_images(const DatasetManifest& manifest, const std::vector<int>& folds_to_include) {
    LabeledImages out;
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (std::find(folds_to_include.begin(), folds_to_include.end(), e.fold) ==
            folds_to_include.end())
            continue;
        Image2D img = read_image(manifest.image_file(i));
        normalize_minmax(img);
        BinaryMask mask = read_mask(manifest.mask_file(i));
        out.add(std::move(img), std::move(mask),
                e.subject_id + "/" + fs::path(e.image_path).stem().string());
    }
    return out;
}

}  // namespace crossbar
