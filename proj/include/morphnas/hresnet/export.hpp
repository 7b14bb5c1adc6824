#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "morphnas/hresnet/inspect.hpp"
#include "morphnas/hresnet/tree.hpp"

namespace morphnas {

inline const char* to_string(LossKind k) {
  return k == LossKind::softmax_cross_entropy ? "softmax_cross_entropy" : "mean_squared_error";
}

template <class T>
nlohmann::json export_node(const Node<T>& node) {
  if (node.is_linear()) {
    const auto& l = node.linear();
    return {{"kind", "linear"}, {"fan_in", l.fan_in()}, {"fan_out", l.fan_out()}};
  }
  const auto& r = node.residual();
  nlohmann::json decaying = nlohmann::json::array();
  for (const auto& entry : r.decay) decaying.push_back(entry.first);
  return {{"kind", "residual"},
          {"id", to_underlying(r.id)},
          {"fan_in", r.fan_in()},
          {"fan_out", r.fan_out()},
          {"H", r.hidden},
          {"dropout", static_cast<double>(r.dropout_p)},
          {"decaying", decaying},
          {"children",
           {{"shortcut", {{"kind", "linear"}, {"fan_in", r.fan_in()}, {"fan_out", r.fan_out()}}},
            {"inner0", export_node(r.inner0)},
            {"inner1", export_node(r.inner1)}}}};
}

/// Nested architecture document mirroring the tree.
template <class T>
nlohmann::json export_architecture(const Network<T>& net, std::size_t depth_floor = 10) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : net.blocks) blocks.push_back(export_node(b));
  return {{"kind", "network"},
          {"loss", to_string(net.loss)},
          {"fan_in", net.input_dim()},
          {"fan_out", net.output_dim()},
          {"param_count", count_params(net)},
          {"depth", depth(net, depth_floor)},
          {"blocks", blocks}};
}

namespace detail {

inline bool require_count(const nlohmann::json& j, const char* key, const std::string& path,
                          std::vector<std::string>& errs) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    errs.push_back(path + ": missing or non-integer \"" + key + "\"");
    return false;
  }
  return true;
}

inline void validate_node_doc(const nlohmann::json& j, const std::string& path,
                              std::vector<std::string>& errs) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    errs.push_back(path + ": node must be an object with a string \"kind\"");
    return;
  }
  const bool ok_in = require_count(j, "fan_in", path, errs);
  const bool ok_out = require_count(j, "fan_out", path, errs);
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "linear") return;
  if (kind != "residual") {
    errs.push_back(path + ": unknown kind \"" + kind + "\"");
    return;
  }
  require_count(j, "id", path, errs);
  const bool ok_h = require_count(j, "H", path, errs);
  if (!j.contains("children") || !j.at("children").is_object()) {
    errs.push_back(path + ": residual without \"children\"");
    return;
  }
  const auto& c = j.at("children");
  for (const char* name : {"shortcut", "inner0", "inner1"}) {
    if (!c.contains(name)) {
      errs.push_back(path + ": missing child \"" + name + "\"");
      return;
    }
    validate_node_doc(c.at(name), path + "/" + name, errs);
  }
  if (!(ok_in && ok_out && ok_h)) return;
  auto dim = [](const nlohmann::json& n, const char* k) {
    return n.contains(k) && n.at(k).is_number_unsigned() ? n.at(k).get<std::size_t>() : std::size_t(-1);
  };
  const std::size_t in = j.at("fan_in").get<std::size_t>();
  const std::size_t out = j.at("fan_out").get<std::size_t>();
  const std::size_t h = j.at("H").get<std::size_t>();
  if (c.at("shortcut").value("kind", "") != "linear") errs.push_back(path + "/shortcut: must be linear");
  if (dim(c.at("shortcut"), "fan_in") != in || dim(c.at("shortcut"), "fan_out") != out)
    errs.push_back(path + "/shortcut: dims do not match parent");
  if (dim(c.at("inner0"), "fan_in") != in || dim(c.at("inner0"), "fan_out") != h)
    errs.push_back(path + "/inner0: dims must be fan_in -> H");
  if (dim(c.at("inner1"), "fan_in") != h || dim(c.at("inner1"), "fan_out") != out)
    errs.push_back(path + "/inner1: dims must be H -> fan_out");
}

}  // namespace detail

/// Checks a document against the export schema. Returns violations with paths.
inline std::vector<std::string> validate_architecture(const nlohmann::json& doc) {
  std::vector<std::string> errs;
  if (!doc.is_object() || doc.value("kind", "") != "network") {
    errs.push_back("$: expected an object with kind \"network\"");
    return errs;
  }
  if (!doc.contains("blocks") || !doc.at("blocks").is_array() || doc.at("blocks").empty()) {
    errs.push_back("$: \"blocks\" must be a non-empty array");
    return errs;
  }
  const auto& blocks = doc.at("blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string path = "$/blocks/" + std::to_string(i);
    detail::validate_node_doc(blocks[i], path, errs);
    if (i > 0 && blocks[i - 1].value("fan_out", std::size_t(0)) != blocks[i].value("fan_in", std::size_t(1)))
      errs.push_back(path + ": fan_in does not match previous block");
  }
  return errs;
}

/// Counts nodes (linear and residual, shortcuts included) in an exported document.
inline std::size_t count_document_nodes(const nlohmann::json& node) {
  if (node.value("kind", "") == "network") {
    std::size_t n = 0;
    for (const auto& b : node.at("blocks")) n += count_document_nodes(b);
    return n;
  }
  if (node.value("kind", "") != "residual") return 1;
  const auto& c = node.at("children");
  return 1 + count_document_nodes(c.at("shortcut")) + count_document_nodes(c.at("inner0")) +
         count_document_nodes(c.at("inner1"));
}

}  // namespace morphnas
