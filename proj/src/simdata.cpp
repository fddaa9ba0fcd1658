#include "neuralign/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "neuralign/binio.hpp"
#include "neuralign/errors.hpp"
#include "neuralign/kernels.hpp"

using nlohmann::json;

namespace neuralign {

void WorldSpec::validate() const {
  if (latent_dim == 0 || embedding_dim == 0)
    throw std::invalid_argument("WorldSpec: latent_dim and embedding_dim must be >= 1");
  if (subjects.empty()) throw std::invalid_argument("WorldSpec: no subjects");
  if (noise_std < 0.0) throw std::invalid_argument("WorldSpec: noise_std must be >= 0");
  if (conserved_fraction < 0.0 || conserved_fraction > 1.0)
    throw std::invalid_argument("WorldSpec: conserved_fraction must be in [0, 1]");
  if (variable_gain_sigma < 0.0)
    throw std::invalid_argument("WorldSpec: variable_gain_sigma must be >= 0");
  if (train_samples == 0 || eval_samples == 0)
    throw std::invalid_argument("WorldSpec: train/eval sample counts must be >= 1");
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    if (s.id.empty()) throw std::invalid_argument("WorldSpec: empty subject id");
    if (!ids.insert(s.id).second)
      throw std::invalid_argument("WorldSpec: duplicate subject id " + s.id);
    if (s.voxels < latent_dim)
      throw std::invalid_argument("WorldSpec: voxel count below latent_dim for " + s.id);
  }
}

const SubjectWorld& World::subject(const std::string& id) const {
  return subjects[subject_index(id)];
}

std::size_t World::subject_index(const std::string& id) const {
  for (std::size_t i = 0; i < subjects.size(); ++i)
    if (subjects[i].id == id) return i;
  throw std::invalid_argument("unknown subject id: " + id);
}

namespace {

// RNG stream layout for a world seed. Sessions get their own streams in
// make_dataset so world generation and session noise never interleave.
enum Stream : std::uint64_t {
  kBank = 0,
  kStimToLatent = 1,
  kConserved = 2,
  kSubjectBase = 10,
  kTrainNoiseBase = 1000,
  kEvalNoiseBase = 2000,
};

bool mixing_rank_ok(const Matrix& g) {
  // Full row rank check through the same pseudo-inverse the oracle uses.
  const Matrix pinv = ridge_pinv(transpose(g), 1e-8);
  const Matrix res = matmul(pinv, transpose(g));
  const std::size_t d = g.rows;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(res.at(i, j) - want) > 1e-6) return false;
    }
  return true;
}

Matrix subject_mixing(const WorldSpec& spec, const Matrix& conserved_block,
                      std::size_t subject_index, std::size_t voxels) {
  const std::size_t d = spec.latent_dim;
  const std::size_t c = spec.conserved_count(voxels);
  const double col_std = 1.0 / std::sqrt(double(d));

  for (std::uint64_t attempt = 0; attempt < 10; ++attempt) {
    RngState rng(spec.seed, kSubjectBase + subject_index * 16 + attempt);
    Matrix g(d, voxels);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < c; ++j) g.at(i, j) = conserved_block.at(i, j);
    // Variable columns: per-subject unit directions scaled by a log-normal
    // response gain, so higher-variability regions also spread in SNR.
    for (std::size_t j = c; j < voxels; ++j) {
      const double gain = std::exp(spec.variable_gain_sigma * rng.next_gaussian());
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        g.at(i, j) = col_std * rng.next_gaussian();
        norm += g.at(i, j) * g.at(i, j);
      }
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < d; ++i) g.at(i, j) *= gain / norm;
    }
    if (mixing_rank_ok(g)) return g;
  }
  throw NumericError("generate_world: mixing map rank-deficient after 10 attempts");
}

}  // namespace

World generate_world(const WorldSpec& spec) {
  spec.validate();
  World w;
  w.spec = spec;

  {
    RngState rng(spec.seed, kBank);
    w.bank = gaussian(rng, spec.bank_size(), spec.embedding_dim, 0.0, 1.0);
    for (std::size_t i = 0; i < w.bank.rows; ++i) {
      const double norm = std::sqrt(kern::sumsq(w.bank.row(i), w.bank.cols));
      if (norm == 0.0) throw NumericError("generate_world: zero-norm stimulus");
      kern::scale(w.bank.row(i), 1.0 / norm, w.bank.cols);
    }
  }
  {
    RngState rng(spec.seed, kStimToLatent);
    w.stim_to_latent = gaussian(rng, spec.embedding_dim, spec.latent_dim, 0.0, 1.0);
  }

  std::size_t max_conserved = 0;
  for (const auto& s : spec.subjects)
    max_conserved = std::max(max_conserved, spec.conserved_count(s.voxels));
  Matrix conserved_block(spec.latent_dim, std::max<std::size_t>(max_conserved, 1));
  {
    RngState rng(spec.seed, kConserved);
    conserved_block = gaussian(rng, spec.latent_dim, conserved_block.cols, 0.0,
                               1.0 / std::sqrt(double(spec.latent_dim)));
    // Conserved voxels model uniformly strong stimulus-locked responses:
    // unit response gain, identical across subjects.
    for (std::size_t j = 0; j < conserved_block.cols; ++j) {
      double norm = 0.0;
      for (std::size_t i = 0; i < conserved_block.rows; ++i)
        norm += conserved_block.at(i, j) * conserved_block.at(i, j);
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < conserved_block.rows; ++i)
        conserved_block.at(i, j) /= norm;
    }
  }

  for (std::size_t si = 0; si < spec.subjects.size(); ++si) {
    const auto& s = spec.subjects[si];
    SubjectWorld sw;
    sw.id = s.id;
    sw.voxels = s.voxels;
    sw.conserved = spec.conserved_count(s.voxels);
    sw.mixing = subject_mixing(spec, conserved_block, si, s.voxels);
    w.subjects.push_back(std::move(sw));
  }
  return w;
}

SubjectSession generate_session(const World& world, const std::string& subject_id,
                                std::span<const std::uint32_t> stimulus_ids,
                                RngState rng) {
  const SubjectWorld& sw = world.subject(subject_id);
  SubjectSession out;
  out.subject_id = subject_id;
  out.stimulus_ids.assign(stimulus_ids.begin(), stimulus_ids.end());

  out.E = Matrix(stimulus_ids.size(), world.spec.embedding_dim);
  for (std::size_t r = 0; r < stimulus_ids.size(); ++r) {
    const std::uint32_t id = stimulus_ids[r];
    if (id >= world.bank.rows)
      throw std::invalid_argument("generate_session: stimulus id out of range");
    std::copy_n(world.bank.row(id), world.bank.cols, out.E.row(r));
  }

  const Matrix latent = matmul(out.E, world.stim_to_latent);
  out.F = matmul(latent, sw.mixing);
  if (world.spec.noise_std > 0.0) {
    const Matrix noise =
        gaussian(rng, out.F.rows, out.F.cols, 0.0, world.spec.noise_std);
    out.F = madd(out.F, noise);
  }
  return out;
}

std::vector<std::size_t> pair_by_similarity(const SubjectSession& novel,
                                            const SubjectSession& known) {
  if (novel.E.rows == 0 || known.E.rows == 0)
    throw std::invalid_argument("pair_by_similarity: empty session");
  const std::size_t a = novel.E.cols;
  if (known.E.cols != a)
    throw std::invalid_argument("pair_by_similarity: embedding width mismatch");

  std::vector<double> known_norm(known.E.rows);
  for (std::size_t j = 0; j < known.E.rows; ++j) {
    known_norm[j] = std::sqrt(kern::sumsq(known.E.row(j), a));
    if (known_norm[j] == 0.0)
      throw NumericError("pair_by_similarity: zero-norm embedding");
  }

  std::vector<std::size_t> pairing(novel.E.rows);
  for (std::size_t i = 0; i < novel.E.rows; ++i) {
    const double ni = std::sqrt(kern::sumsq(novel.E.row(i), a));
    if (ni == 0.0) throw NumericError("pair_by_similarity: zero-norm embedding");
    double best = -2.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < known.E.rows; ++j) {
      const double sim = kern::dot(novel.E.row(i), known.E.row(j), a) / (ni * known_norm[j]);
      if (sim > best) {
        best = sim;
        best_j = j;
      }
    }
    pairing[i] = best_j;
  }
  return pairing;
}

Matrix oracle_transfer(const World& world, const std::string& novel_id,
                       const std::string& known_id, double lambda) {
  const Matrix& g_n = world.subject(novel_id).mixing;
  const Matrix& g_k = world.subject(known_id).mixing;
  // Row-vector convention: M = G_N' (G_N G_N' + lambda I)^-1 G_K, obtained
  // from the ridge pseudo-inverse of the (tall) transposed mixing map.
  return matmul(transpose(ridge_pinv(transpose(g_n), lambda)), g_k);
}

const Dataset::Subject& Dataset::subject(const std::string& id) const {
  for (const auto& s : subjects)
    if (s.id == id) return s;
  throw std::invalid_argument("unknown subject id: " + id);
}

Dataset make_dataset(const World& world) {
  const WorldSpec& spec = world.spec;
  Dataset ds;
  ds.world_spec = spec;

  std::vector<std::uint32_t> eval_ids(spec.eval_samples);
  for (std::size_t i = 0; i < spec.eval_samples; ++i)
    eval_ids[i] = static_cast<std::uint32_t>(i);

  for (std::size_t si = 0; si < spec.subjects.size(); ++si) {
    const auto& s = spec.subjects[si];
    std::vector<std::uint32_t> train_ids(spec.train_samples);
    const std::size_t base = spec.eval_samples + si * spec.train_samples;
    for (std::size_t i = 0; i < spec.train_samples; ++i)
      train_ids[i] = static_cast<std::uint32_t>(base + i);

    Dataset::Subject sub;
    sub.id = s.id;
    sub.voxels = s.voxels;
    sub.conserved = spec.conserved_count(s.voxels);
    sub.train = generate_session(world, s.id, train_ids,
                                 RngState(spec.seed, kTrainNoiseBase + si));
    sub.eval = generate_session(world, s.id, eval_ids,
                                RngState(spec.seed, kEvalNoiseBase + si));
    ds.subjects.push_back(std::move(sub));
  }
  return ds;
}

json world_spec_to_json(const WorldSpec& spec) {
  json subjects = json::array();
  for (const auto& s : spec.subjects)
    subjects.push_back({{"id", s.id}, {"voxels", s.voxels}});
  return json{{"latent_dim", spec.latent_dim},
              {"embedding_dim", spec.embedding_dim},
              {"noise_std", spec.noise_std},
              {"conserved_fraction", spec.conserved_fraction},
              {"variable_gain_sigma", spec.variable_gain_sigma},
              {"seed", spec.seed},
              {"train_samples", spec.train_samples},
              {"eval_samples", spec.eval_samples},
              {"subjects", subjects}};
}

WorldSpec world_spec_from_json(const json& j) {
  WorldSpec spec;
  spec.latent_dim = j.at("latent_dim").get<std::size_t>();
  spec.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  spec.noise_std = j.at("noise_std").get<double>();
  spec.conserved_fraction = j.at("conserved_fraction").get<double>();
  if (j.contains("variable_gain_sigma"))
    spec.variable_gain_sigma = j.at("variable_gain_sigma").get<double>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.train_samples = j.at("train_samples").get<std::size_t>();
  spec.eval_samples = j.at("eval_samples").get<std::size_t>();
  for (const auto& s : j.at("subjects"))
    spec.subjects.push_back({s.at("id").get<std::string>(), s.at("voxels").get<std::size_t>()});
  spec.validate();
  return spec;
}

namespace {

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows + bottom.rows, top.cols);
  std::copy(top.data.begin(), top.data.end(), out.data.begin());
  std::copy(bottom.data.begin(), bottom.data.end(), out.data.begin() + top.size());
  return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(IoError::Kind::file, "cannot create " + dir.string());

  json subjects = json::array();
  for (const auto& s : ds.subjects) {
    const std::string fmri_name = "fmri_" + s.id + ".bin";
    const std::string stim_name = "stim_" + s.id + ".bin";

    const auto fmri_bytes = matrix_to_f32_bytes(stack_rows(s.train.F, s.eval.F));
    const auto stim_bytes = matrix_to_f32_bytes(stack_rows(s.train.E, s.eval.E));
    write_file_atomic(dir / fmri_name, fmri_bytes.data(), fmri_bytes.size());
    write_file_atomic(dir / stim_name, stim_bytes.data(), stim_bytes.size());

    subjects.push_back({{"id", s.id},
                        {"voxels", s.voxels},
                        {"conserved", s.conserved},
                        {"fmri_file", fmri_name},
                        {"fmri_sha256", sha256_hex(fmri_bytes)},
                        {"stim_file", stim_name},
                        {"stim_sha256", sha256_hex(stim_bytes)},
                        {"train_stimulus_ids", s.train.stimulus_ids},
                        {"eval_stimulus_ids", s.eval.stimulus_ids}});
  }

  json manifest{{"format_version", 1},
                {"world", world_spec_to_json(ds.world_spec)},
                {"train_samples", ds.world_spec.train_samples},
                {"eval_samples", ds.world_spec.eval_samples},
                {"subjects", subjects}};
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_bytes = read_file(dir / "manifest.json");
  json manifest;
  try {
    manifest = json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const json::exception& e) {
    throw IoError(IoError::Kind::format, std::string("manifest.json: ") + e.what());
  }

  Dataset ds;
  try {
    if (manifest.at("format_version").get<int>() != 1)
      throw IoError(IoError::Kind::format, "manifest: unsupported format_version");
    ds.world_spec = world_spec_from_json(manifest.at("world"));
    const auto train_samples = manifest.at("train_samples").get<std::size_t>();
    const auto eval_samples = manifest.at("eval_samples").get<std::size_t>();
    if (train_samples != ds.world_spec.train_samples ||
        eval_samples != ds.world_spec.eval_samples)
      throw IoError(IoError::Kind::format, "manifest: sample counts disagree with world");

    const std::vector<std::uint32_t>* shared_eval_ids = nullptr;
    for (const auto& js : manifest.at("subjects")) {
      Dataset::Subject sub;
      sub.id = js.at("id").get<std::string>();
      sub.voxels = js.at("voxels").get<std::size_t>();
      sub.conserved = js.at("conserved").get<std::size_t>();

      const auto train_ids = js.at("train_stimulus_ids").get<std::vector<std::uint32_t>>();
      const auto eval_ids = js.at("eval_stimulus_ids").get<std::vector<std::uint32_t>>();
      if (train_ids.size() != train_samples || eval_ids.size() != eval_samples)
        throw IoError(IoError::Kind::format, "manifest: stimulus id count mismatch");

      auto load_split = [&](const char* file_key, const char* sha_key, std::size_t cols,
                            Matrix& train_out, Matrix& eval_out) {
        const auto name = js.at(file_key).get<std::string>();
        const auto bytes = read_file(dir / name);
        const auto want_sha = js.at(sha_key).get<std::string>();
        if (sha256_hex(bytes) != want_sha)
          throw IoError(IoError::Kind::checksum, name + ": checksum mismatch");
        const std::size_t rows = train_samples + eval_samples;
        if (bytes.size() != rows * cols * sizeof(float))
          throw IoError(IoError::Kind::format,
                        name + ": binary length disagrees with manifest shape");
        const Matrix all = matrix_from_f32_bytes(bytes, rows, cols);
        train_out = Matrix(train_samples, cols);
        eval_out = Matrix(eval_samples, cols);
        std::copy_n(all.data.begin(), train_out.size(), train_out.data.begin());
        std::copy_n(all.data.begin() + train_out.size(), eval_out.size(),
                    eval_out.data.begin());
      };

      load_split("fmri_file", "fmri_sha256", sub.voxels, sub.train.F, sub.eval.F);
      load_split("stim_file", "stim_sha256", ds.world_spec.embedding_dim, sub.train.E,
                 sub.eval.E);

      sub.train.subject_id = sub.id;
      sub.train.stimulus_ids = train_ids;
      sub.eval.subject_id = sub.id;
      sub.eval.stimulus_ids = eval_ids;

      ds.subjects.push_back(std::move(sub));
      if (shared_eval_ids == nullptr)
        shared_eval_ids = &ds.subjects.back().eval.stimulus_ids;
      else if (*shared_eval_ids != ds.subjects.back().eval.stimulus_ids)
        throw IoError(IoError::Kind::format, "manifest: eval stimuli not shared");
    }
  } catch (const json::exception& e) {
    throw IoError(IoError::Kind::format, std::string("manifest.json: ") + e.what());
  }
  return ds;
}

}  // namespace neuralign
