#include <cmath>
#include <limits>

#include "neuralign/binio.hpp"
#include "neuralign/errors.hpp"
#include "neuralign/train.hpp"

using nlohmann::json;

namespace neuralign {

namespace {

struct BlockEntry {
  std::string name;
  const Matrix* m;
};

std::vector<BlockEntry> model_blocks(const std::string& prefix, const AlignmentModel& m) {
  return {{prefix + "A", &m.A},           {prefix + "B", &m.B},
          {prefix + "W_diff", &m.W_diff}, {prefix + "b_diff", &m.b_diff},
          {prefix + "W_f", &m.W_f},       {prefix + "b_f", &m.b_f},
          {prefix + "W_dec", &m.W_dec}};
}

std::vector<BlockEntry> grad_blocks(const std::string& prefix, const Gradients& g) {
  return {{prefix + "A", &g.A},           {prefix + "B", &g.B},
          {prefix + "W_diff", &g.W_diff}, {prefix + "b_diff", &g.b_diff},
          {prefix + "W_f", &g.W_f},       {prefix + "b_f", &g.b_f}};
}

std::vector<BlockEntry> all_blocks(const Checkpoint& ck) {
  std::vector<BlockEntry> blocks = model_blocks("", ck.model);
  for (auto& b : grad_blocks("adam_m_", ck.adam.m)) blocks.push_back(b);
  for (auto& b : grad_blocks("adam_v_", ck.adam.v)) blocks.push_back(b);
  if (ck.best_epoch >= 0)
    for (auto& b : model_blocks("best_", ck.best_model)) blocks.push_back(b);
  return blocks;
}

json history_to_json(const std::vector<HistoryRow>& history) {
  json arr = json::array();
  for (const auto& row : history) {
    json j{{"epoch", row.epoch},
           {"l_total", row.loss.l_total},
           {"l_rec", row.loss.l_rec},
           {"l_kl", row.loss.l_kl},
           {"l_latent", row.loss.l_latent},
           {"l_dec", row.loss.l_dec_proxy}};
    if (row.fsc_mean) j["fsc_mean"] = *row.fsc_mean;
    if (row.transfer_error) j["transfer_error"] = *row.transfer_error;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<HistoryRow> history_from_json(const json& arr, const LossCoeffs& coeffs) {
  std::vector<HistoryRow> out;
  for (const auto& j : arr) {
    HistoryRow row;
    row.epoch = j.at("epoch").get<long long>();
    row.loss.coeffs = coeffs;
    row.loss.l_total = j.at("l_total").get<double>();
    row.loss.l_rec = j.at("l_rec").get<double>();
    row.loss.l_kl = j.at("l_kl").get<double>();
    row.loss.l_latent = j.at("l_latent").get<double>();
    row.loss.l_dec_proxy = j.at("l_dec").get<double>();
    if (j.contains("fsc_mean")) row.fsc_mean = j.at("fsc_mean").get<double>();
    if (j.contains("transfer_error"))
      row.transfer_error = j.at("transfer_error").get<double>();
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto blocks = all_blocks(ck);

  std::vector<std::uint8_t> payload;
  json block_table = json::array();
  for (const auto& b : blocks) {
    block_table.push_back({{"name", b.name},
                           {"rows", b.m->rows},
                           {"cols", b.m->cols},
                           {"offset", payload.size()}});
    append_f64_bytes(payload, *b.m);
  }

  const std::string payload_name = path.filename().string() + ".bin";
  const Dims& d = ck.model.dims;

  json header{{"format_version", ck.format_version},
              {"dims",
               {{"n", d.n},
                {"k", d.k},
                {"h", d.h},
                {"a", d.a},
                {"d_latentworld", d.d_latentworld}}},
              {"config", ck.config.to_json()},
              {"novel_id", ck.novel_id},
              {"known_id", ck.known_id},
              {"epoch", ck.epoch},
              {"stale_evals", ck.stale_evals},
              {"early_stopped", ck.early_stopped},
              {"best_epoch", ck.best_epoch},
              {"best_fsc", ck.best_epoch >= 0 ? json(ck.best_fsc) : json(nullptr)},
              {"adam",
               {{"t", ck.adam.t},
                {"beta1", ck.adam.beta1},
                {"beta2", ck.adam.beta2},
                {"eps", ck.adam.eps},
                {"lr_btm", ck.adam.lr.btm},
                {"lr_mapper", ck.adam.lr.mapper},
                {"lr_embedder", ck.adam.lr.embedder}}},
              {"history", history_to_json(ck.history)},
              {"blocks", block_table},
              {"payload_file", payload_name},
              {"payload_sha256", sha256_hex(payload.data(), payload.size())}};

  write_file_atomic(path.parent_path().empty()
                        ? std::filesystem::path(payload_name)
                        : path.parent_path() / payload_name,
                    payload.data(), payload.size());
  write_text_atomic(path, header.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto header_bytes = read_file(path);
  json header;
  try {
    header = json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const json::exception& e) {
    throw IoError(IoError::Kind::format, path.string() + ": " + e.what());
  }

  try {
    Checkpoint ck;
    ck.format_version = header.at("format_version").get<int>();
    if (ck.format_version != 1)
      throw IoError(IoError::Kind::format, "checkpoint: unsupported format_version");

    const auto payload_name = header.at("payload_file").get<std::string>();
    const auto payload_path = path.parent_path().empty()
                                  ? std::filesystem::path(payload_name)
                                  : path.parent_path() / payload_name;
    const auto payload = read_file(payload_path);
    if (sha256_hex(payload.data(), payload.size()) !=
        header.at("payload_sha256").get<std::string>())
      throw IoError(IoError::Kind::checksum, "checkpoint: payload checksum mismatch");

    Dims dims;
    const json& jd = header.at("dims");
    dims.n = jd.at("n").get<std::size_t>();
    dims.k = jd.at("k").get<std::size_t>();
    dims.h = jd.at("h").get<std::size_t>();
    dims.a = jd.at("a").get<std::size_t>();
    dims.d_latentworld = jd.at("d_latentworld").get<std::size_t>();

    ck.config = TrainConfig::from_json(header.at("config"));
    ck.novel_id = header.at("novel_id").get<std::string>();
    ck.known_id = header.at("known_id").get<std::string>();
    ck.epoch = header.at("epoch").get<long long>();
    ck.stale_evals = header.at("stale_evals").get<long long>();
    ck.early_stopped = header.at("early_stopped").get<bool>();
    ck.best_epoch = header.at("best_epoch").get<long long>();
    ck.best_fsc = header.at("best_fsc").is_null()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : header.at("best_fsc").get<double>();
    ck.history = history_from_json(header.at("history"), ck.config.coeffs);

    const json& adam = header.at("adam");
    ck.adam.t = adam.at("t").get<long long>();
    ck.adam.beta1 = adam.at("beta1").get<double>();
    ck.adam.beta2 = adam.at("beta2").get<double>();
    ck.adam.eps = adam.at("eps").get<double>();
    ck.adam.lr.btm = adam.at("lr_btm").get<double>();
    ck.adam.lr.mapper = adam.at("lr_mapper").get<double>();
    ck.adam.lr.embedder = adam.at("lr_embedder").get<double>();

    // Read blocks by the declared table.
    std::size_t declared = 0;
    auto read_block = [&](const std::string& name) -> Matrix {
      for (const auto& jb : header.at("blocks")) {
        if (jb.at("name").get<std::string>() != name) continue;
        const auto rows = jb.at("rows").get<std::size_t>();
        const auto cols = jb.at("cols").get<std::size_t>();
        const auto offset = jb.at("offset").get<std::size_t>();
        const std::size_t bytes = rows * cols * sizeof(double);
        if (offset + bytes > payload.size())
          throw IoError(IoError::Kind::format, "checkpoint: block outside payload");
        declared += bytes;
        return matrix_from_f64_bytes(payload.data() + offset, rows, cols);
      }
      throw IoError(IoError::Kind::format, "checkpoint: missing block " + name);
    };

    auto read_model = [&](const std::string& prefix, AlignmentModel& m) {
      m.dims = dims;
      m.A = read_block(prefix + "A");
      m.B = read_block(prefix + "B");
      m.W_diff = read_block(prefix + "W_diff");
      m.b_diff = read_block(prefix + "b_diff");
      m.W_f = read_block(prefix + "W_f");
      m.b_f = read_block(prefix + "b_f");
      m.W_dec = read_block(prefix + "W_dec");
      m.validate_shapes();
    };

    read_model("", ck.model);
    auto read_grads = [&](const std::string& prefix, Gradients& g) {
      g.A = read_block(prefix + "A");
      g.B = read_block(prefix + "B");
      g.W_diff = read_block(prefix + "W_diff");
      g.b_diff = read_block(prefix + "b_diff");
      g.W_f = read_block(prefix + "W_f");
      g.b_f = read_block(prefix + "b_f");
    };
    read_grads("adam_m_", ck.adam.m);
    read_grads("adam_v_", ck.adam.v);
    if (ck.best_epoch >= 0) read_model("best_", ck.best_model);

    if (declared != payload.size())
      throw IoError(IoError::Kind::format,
                    "checkpoint: payload length disagrees with block table");
    return ck;
  } catch (const json::exception& e) {
    throw IoError(IoError::Kind::format, path.string() + ": " + e.what());
  }
}

}  // namespace neuralign
