#include "causalmask/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "causalmask/adam.hpp"
#include "causalmask/config.hpp"
#include "causalmask/errors.hpp"
#include "causalmask/fileio.hpp"
#include "causalmask/textio.hpp"

namespace causalmask {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

// Bounds-checked little-endian reader over the checkpoint bytes. Offsets in
// the errors are absolute file offsets.
struct Cursor {
  std::string_view bytes;
  std::size_t pos = 0;

  std::string_view take(std::size_t n, const char* what) {
    if (bytes.size() - pos < n) {
      throw FormatError(std::string("checkpoint ends inside ") + what, pos);
    }
    const std::string_view out = bytes.substr(pos, n);
    pos += n;
    return out;
  }

  std::uint32_t take_u32(const char* what) {
    const std::string_view b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }

  std::uint64_t take_u64(const char* what) {
    const std::string_view b = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }

  double take_f64(const char* what) { return std::bit_cast<double>(take_u64(what)); }
};

void encode_mlp(std::string& out, const MlpParams& params) {
  put_u32(out, static_cast<std::uint32_t>(params.layer_dims.size()));
  for (const std::size_t dim : params.layer_dims) {
    put_u64(out, dim);
  }
  put_u32(out, params.output_activation == Activation::kSigmoid ? 1 : 0);
  for (const double v : flatten(params)) {
    put_f64(out, v);
  }
}

MlpParams decode_mlp(Cursor& cur, const char* what) {
  const std::size_t header_pos = cur.pos;
  const std::uint32_t num_dims = cur.take_u32(what);
  if (num_dims < 2) {
    throw FormatError(std::string(what) + ": a network needs at least two layer dims",
                      header_pos);
  }
  MlpParams params;
  params.layer_dims.reserve(num_dims);
  for (std::uint32_t i = 0; i < num_dims; ++i) {
    const std::size_t pos = cur.pos;
    const std::uint64_t dim = cur.take_u64(what);
    if (dim == 0 || dim > (1u << 20)) {
      throw FormatError(std::string(what) + ": layer dimension out of range", pos);
    }
    params.layer_dims.push_back(static_cast<std::size_t>(dim));
  }
  const std::size_t act_pos = cur.pos;
  const std::uint32_t act = cur.take_u32(what);
  if (act > 1) {
    throw FormatError(std::string(what) + ": unknown activation code", act_pos);
  }
  params.output_activation = act == 1 ? Activation::kSigmoid : Activation::kIdentity;
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < params.layer_dims.size(); ++l) {
    params.weights.emplace_back(params.layer_dims[l], params.layer_dims[l + 1]);
    params.biases.emplace_back(params.layer_dims[l + 1], 0.0);
    count += params.layer_dims[l] * params.layer_dims[l + 1] + params.layer_dims[l + 1];
  }
  std::vector<double> flat(count);
  for (double& v : flat) {
    v = cur.take_f64(what);
  }
  unflatten(flat, params);
  return params;
}

void encode_adam(std::string& out, const AdamState& state) {
  put_u64(out, state.step_count);
  put_f64(out, state.beta1);
  put_f64(out, state.beta2);
  put_f64(out, state.epsilon);
  for (const auto* moments : {&state.m_weights, &state.v_weights}) {
    const auto& biases = moments == &state.m_weights ? state.m_biases : state.v_biases;
    for (std::size_t l = 0; l < moments->size(); ++l) {
      for (const double v : (*moments)[l].data) {
        put_f64(out, v);
      }
      for (const double v : biases[l]) {
        put_f64(out, v);
      }
    }
  }
}

AdamState decode_adam(Cursor& cur, const MlpParams& params, const char* what) {
  AdamState state = make_adam_state(params);
  state.step_count = cur.take_u64(what);
  state.beta1 = cur.take_f64(what);
  state.beta2 = cur.take_f64(what);
  state.epsilon = cur.take_f64(what);
  for (auto* moments : {&state.m_weights, &state.v_weights}) {
    auto& biases = moments == &state.m_weights ? state.m_biases : state.v_biases;
    for (std::size_t l = 0; l < moments->size(); ++l) {
      for (double& v : (*moments)[l].data) {
        v = cur.take_f64(what);
      }
      for (double& v : biases[l]) {
        v = cur.take_f64(what);
      }
    }
  }
  return state;
}

void append_section(std::string& out, std::string_view tag, std::string_view payload) {
  out.append(tag);
  put_u64(out, payload.size());
  out.append(payload);
}

// Opens the next section, which must carry exactly the expected tag, and
// returns a cursor confined to its payload (positions stay file-absolute).
Cursor open_section(Cursor& cur, std::string_view tag) {
  const std::size_t tag_pos = cur.pos;
  const std::string_view found = cur.take(4, "a section tag");
  if (found != tag) {
    throw FormatError("checkpoint: expected section '" + std::string(tag) + "', found '" +
                          std::string(found) + "'",
                      tag_pos);
  }
  const std::uint64_t len = cur.take_u64("a section length");
  if (cur.bytes.size() - cur.pos < len) {
    throw FormatError("checkpoint: section '" + std::string(tag) + "' runs past the end",
                      cur.pos);
  }
  Cursor section{cur.bytes.substr(0, cur.pos + len), cur.pos};
  cur.pos += len;
  return section;
}

void require_consumed(const Cursor& section, std::string_view tag) {
  if (section.pos != section.bytes.size()) {
    throw FormatError("checkpoint: section '" + std::string(tag) + "' has " +
                          std::to_string(section.bytes.size() - section.pos) + " trailing bytes",
                      section.pos);
  }
}

TextDoc parse_section_doc(const Cursor& section, std::string_view tag) {
  const std::string_view payload = section.bytes.substr(section.pos);
  try {
    return parse_text_doc(payload);
  } catch (const FormatError& e) {
    throw FormatError("checkpoint section '" + std::string(tag) + "': " + e.what(),
                      section.pos + e.offset());
  }
}

std::string meta_text(const TrainerState& state) {
  TextDoc doc;
  doc.schema = std::string(kCheckpointMetaSchema);
  doc.set_u64("dim", state.bundle.dim());
  doc.set("mode", ablation_name(state.mode));
  doc.set_u64("next_epoch", state.next_epoch);
  doc.set_double("best_val_total", state.best_val_total);
  doc.set_u64("epochs_since_improvement", state.epochs_since_improvement);
  doc.set_bool("finished", state.finished);
  return serialize_text_doc(doc);
}

}  // namespace

std::string serialize_checkpoint(const TrainerState& state) {
  std::string out;
  out.append(kCheckpointMagic);
  put_u32(out, kCheckpointVersion);

  append_section(out, "CONF", serialize_text_doc(config_to_doc(state.cfg)));
  append_section(out, "META", meta_text(state));

  std::string mnet;
  put_f64(mnet, state.bundle.mask_net.tau);
  encode_mlp(mnet, state.bundle.mask_net.net);
  append_section(out, "MNET", mnet);

  std::string hnet;
  encode_mlp(hnet, state.bundle.classifier_h);
  append_section(out, "HNET", hnet);

  std::string dnet;
  encode_mlp(dnet, state.bundle.adversary_d);
  append_section(out, "DNET", dnet);

  std::string admm;
  encode_adam(admm, state.opt.mask_net);
  append_section(out, "ADMM", admm);

  std::string admh;
  encode_adam(admh, state.opt.classifier_h);
  append_section(out, "ADMH", admh);

  std::string admd;
  encode_adam(admd, state.opt.adversary_d);
  append_section(out, "ADMD", admd);

  std::string best;
  put_f64(best, state.best_bundle.mask_net.tau);
  encode_mlp(best, state.best_bundle.mask_net.net);
  encode_mlp(best, state.best_bundle.classifier_h);
  encode_mlp(best, state.best_bundle.adversary_d);
  append_section(out, "BEST", best);

  append_section(out, "HIST", serialize_text_doc(history_to_doc(state.history)));
  append_section(out, "RNGS", state.noise.serialize());
  return out;
}

TrainerState deserialize_checkpoint(std::string_view bytes) {
  Cursor cur{bytes, 0};
  const std::string_view magic = cur.take(4, "the magic");
  if (magic != kCheckpointMagic) {
    throw FormatError("checkpoint: bad magic", 0);
  }
  const std::size_t version_pos = cur.pos;
  const std::uint32_t version = cur.take_u32("the format version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version),
                      version_pos);
  }

  TrainerState state;

  {
    Cursor conf = open_section(cur, "CONF");
    const TextDoc doc = parse_section_doc(conf, "CONF");
    conf.pos = conf.bytes.size();
    require_consumed(conf, "CONF");
    try {
      state.cfg = config_from_doc(doc);
    } catch (const Error& e) {
      throw FormatError(std::string("checkpoint section 'CONF': ") + e.what());
    }
  }

  std::size_t dim = 0;
  {
    Cursor meta = open_section(cur, "META");
    const std::size_t meta_pos = meta.pos;
    const TextDoc doc = parse_section_doc(meta, "META");
    meta.pos = meta.bytes.size();
    require_consumed(meta, "META");
    if (doc.schema != kCheckpointMetaSchema) {
      throw FormatError("checkpoint META: expected schema '" + std::string(kCheckpointMetaSchema) +
                            "', found '" + doc.schema + "'",
                        meta_pos);
    }
    try {
      dim = doc.require_u64("dim");
      state.mode = ablation_from_name(doc.require("mode"));
      state.next_epoch = doc.require_u64("next_epoch");
      state.best_val_total = doc.require_double("best_val_total");
      state.epochs_since_improvement = doc.require_u64("epochs_since_improvement");
      state.finished = doc.require_bool("finished");
    } catch (const Error& e) {
      throw FormatError(std::string("checkpoint section 'META': ") + e.what());
    }
    if (dim == 0) {
      throw FormatError("checkpoint META: dim must be positive", meta_pos);
    }
  }

  const bool frozen = state.mode == AblationMode::kMaskingOnly ||
                      state.mode == AblationMode::kBothOff;
  const bool copies = state.mode == AblationMode::kMaskingOnly;

  auto check_dim = [&](const MlpParams& params, const char* what) {
    if (params.input_dim() != dim) {
      throw FormatError(std::string("checkpoint: ") + what + " expects input width " +
                        std::to_string(params.input_dim()) + ", META says " +
                        std::to_string(dim));
    }
  };

  {
    Cursor mnet = open_section(cur, "MNET");
    state.bundle.mask_net.tau = mnet.take_f64("the mask temperature");
    state.bundle.mask_net.net = decode_mlp(mnet, "MNET");
    require_consumed(mnet, "MNET");
    check_dim(state.bundle.mask_net.net, "the mask net");
  }
  {
    Cursor hnet = open_section(cur, "HNET");
    state.bundle.classifier_h = decode_mlp(hnet, "HNET");
    require_consumed(hnet, "HNET");
    check_dim(state.bundle.classifier_h, "the classifier");
  }
  {
    Cursor dnet = open_section(cur, "DNET");
    state.bundle.adversary_d = decode_mlp(dnet, "DNET");
    require_consumed(dnet, "DNET");
    check_dim(state.bundle.adversary_d, "the adversary");
  }
  state.bundle.mask_frozen = frozen;
  state.bundle.frozen_znc_copies_input = copies;

  {
    Cursor admm = open_section(cur, "ADMM");
    state.opt.mask_net = decode_adam(admm, state.bundle.mask_net.net, "ADMM");
    require_consumed(admm, "ADMM");
  }
  {
    Cursor admh = open_section(cur, "ADMH");
    state.opt.classifier_h = decode_adam(admh, state.bundle.classifier_h, "ADMH");
    require_consumed(admh, "ADMH");
  }
  {
    Cursor admd = open_section(cur, "ADMD");
    state.opt.adversary_d = decode_adam(admd, state.bundle.adversary_d, "ADMD");
    require_consumed(admd, "ADMD");
  }

  {
    Cursor best = open_section(cur, "BEST");
    state.best_bundle.mask_net.tau = best.take_f64("the best-snapshot temperature");
    state.best_bundle.mask_net.net = decode_mlp(best, "BEST (mask net)");
    state.best_bundle.classifier_h = decode_mlp(best, "BEST (classifier)");
    state.best_bundle.adversary_d = decode_mlp(best, "BEST (adversary)");
    require_consumed(best, "BEST");
    check_dim(state.best_bundle.mask_net.net, "the best-snapshot mask net");
    check_dim(state.best_bundle.classifier_h, "the best-snapshot classifier");
    check_dim(state.best_bundle.adversary_d, "the best-snapshot adversary");
    state.best_bundle.mask_frozen = frozen;
    state.best_bundle.frozen_znc_copies_input = copies;
  }

  {
    Cursor hist = open_section(cur, "HIST");
    const TextDoc doc = parse_section_doc(hist, "HIST");
    hist.pos = hist.bytes.size();
    require_consumed(hist, "HIST");
    try {
      state.history = history_from_doc(doc);
    } catch (const Error& e) {
      throw FormatError(std::string("checkpoint section 'HIST': ") + e.what());
    }
    if (state.history.epochs.size() != state.next_epoch) {
      throw FormatError("checkpoint: history records " +
                        std::to_string(state.history.epochs.size()) +
                        " epochs but META expects " + std::to_string(state.next_epoch));
    }
  }

  {
    Cursor rngs = open_section(cur, "RNGS");
    const std::string_view payload = rngs.bytes.substr(rngs.pos);
    rngs.pos = rngs.bytes.size();
    try {
      state.noise = NoiseSource::deserialize(std::string(payload));
    } catch (const Error& e) {
      throw FormatError(std::string("checkpoint section 'RNGS': ") + e.what());
    }
  }

  if (cur.pos != bytes.size()) {
    throw FormatError("checkpoint: " + std::to_string(bytes.size() - cur.pos) + " trailing bytes",
                      cur.pos);
  }
  return state;
}

void save_checkpoint(const std::string& path, const TrainerState& state) {
  write_file_atomic(path, serialize_checkpoint(state));
}

TrainerState load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

}  // namespace causalmask
