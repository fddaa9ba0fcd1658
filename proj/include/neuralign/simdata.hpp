#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralign/matrix.hpp"
#include "neuralign/rng.hpp"

namespace neuralign {

struct SubjectSpec {
  std::string id;
  std::size_t voxels = 0;
};

// Generative description of the simulated multi-subject world. Stimuli are
// unit-norm embeddings; a shared map C sends them to a d-dimensional latent
// code, and each subject mixes that code into voxel space with its own map.
// The first floor(conserved_fraction * voxels) voxels of every subject share
// identical mixing columns (the stand-in for early visual cortex); the
// remaining "variable" columns are per-subject and carry log-normal response
// gains, so higher-variability regions also spread in per-voxel SNR.
struct WorldSpec {
  std::size_t latent_dim = 16;
  std::size_t embedding_dim = 32;
  double noise_std = 0.05;
  double conserved_fraction = 0.0;
  double variable_gain_sigma = 0.8;  // log-std of variable-column gains
  std::uint64_t seed = 0;
  std::size_t train_samples = 800;
  std::size_t eval_samples = 200;
  std::vector<SubjectSpec> subjects;

  std::size_t bank_size() const {
    return subjects.size() * train_samples + eval_samples;
  }
  std::size_t conserved_count(std::size_t voxels) const {
    return static_cast<std::size_t>(conserved_fraction * double(voxels));
  }
  void validate() const;
};

nlohmann::json world_spec_to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const nlohmann::json& j);

struct SubjectWorld {
  std::string id;
  std::size_t voxels = 0;
  std::size_t conserved = 0;
  Matrix mixing;  // d x voxels, full row rank
};

struct World {
  WorldSpec spec;
  Matrix bank;            // bank_size x a, unit-norm rows
  Matrix stim_to_latent;  // a x d
  std::vector<SubjectWorld> subjects;

  const SubjectWorld& subject(const std::string& id) const;
  std::size_t subject_index(const std::string& id) const;
};

// Deterministic in the spec (including the seed). Each mixing map must pass
// the rank check ridge_pinv(G', 1e-8) * G' ~ I_d; a subject's variable columns
// are redrawn up to 10 times before the failure is reported.
World generate_world(const WorldSpec& spec);

// One scanning session: rows of voxel responses with the embeddings shown.
struct SubjectSession {
  std::string subject_id;
  Matrix F;  // samples x voxels
  std::vector<std::uint32_t> stimulus_ids;
  Matrix E;  // samples x a
};

SubjectSession generate_session(const World& world, const std::string& subject_id,
                                std::span<const std::uint32_t> stimulus_ids,
                                RngState rng);

// For each novel sample, the known sample with the highest stimulus cosine
// similarity (ties broken by lowest index; with replacement).
std::vector<std::size_t> pair_by_similarity(const SubjectSession& novel,
                                            const SubjectSession& known);

// Ground-truth transfer: the n x k map with F_N * M ~ F_K on noiseless shared
// stimuli, built from the ridge pseudo-inverse of the novel mixing map.
Matrix oracle_transfer(const World& world, const std::string& novel_id,
                       const std::string& known_id, double lambda);

// A dataset is one train + one eval session per subject; eval stimuli are
// shared across subjects, train stimuli are disjoint between subjects.
struct Dataset {
  struct Subject {
    std::string id;
    std::size_t voxels = 0;
    std::size_t conserved = 0;
    SubjectSession train;
    SubjectSession eval;
  };

  WorldSpec world_spec;
  std::vector<Subject> subjects;

  const Subject& subject(const std::string& id) const;
};

Dataset make_dataset(const World& world);

// Directory layout: manifest.json plus per-subject little-endian float32
// row-major binaries fmri_<id>.bin / stim_<id>.bin (train rows then eval
// rows, no header). The manifest records shapes, stimulus ids, the world
// spec, and a SHA-256 per binary.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace neuralign
