#include "privflow/facts_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "privflow/error.hpp"

namespace privflow {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Manifest

void reject_unknown_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ManifestError(path + key, "unknown field");
  }
}

std::vector<std::string> string_list(const json& obj, const char* key, const std::string& path) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw ManifestError(path + key, "must be an array of strings");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string() || arr[i].get<std::string>().empty()) {
      throw ManifestError(path + key + "[" + std::to_string(i) + "]", "must be a non-empty string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

Manifest manifest_from_json(const json& root) {
  if (!root.is_object()) throw ManifestError("$", "must be an object");
  reject_unknown_keys(root, "", {"version", "services", "gateway_routes"});

  Manifest m;
  if (!root.contains("version") || !root.at("version").is_number_integer()) {
    throw ManifestError("version", "missing or not an integer");
  }
  m.version = root.at("version").get<int>();
  if (m.version != kManifestVersion) throw ManifestError("version", "unsupported version " + std::to_string(m.version));

  if (!root.contains("services") || !root.at("services").is_array() || root.at("services").empty()) {
    throw ManifestError("services", "must be a non-empty array");
  }
  std::set<std::string> names;
  std::size_t entries = 0;
  const json& services = root.at("services");
  for (std::size_t i = 0; i < services.size(); ++i) {
    const json& s = services[i];
    std::string path = "services[" + std::to_string(i) + "].";
    if (!s.is_object()) throw ManifestError("services[" + std::to_string(i) + "]", "must be an object");
    reject_unknown_keys(s, path, {"name", "entry", "base_url", "sources", "facts"});
    ManifestService ms;
    if (!s.contains("name") || !s.at("name").is_string() || s.at("name").get<std::string>().empty()) {
      throw ManifestError(path + "name", "missing or empty");
    }
    ms.name = s.at("name").get<std::string>();
    if (!names.insert(ms.name).second) throw ManifestError(path + "name", "duplicate service '" + ms.name + "'");
    if (s.contains("entry")) {
      if (!s.at("entry").is_boolean()) throw ManifestError(path + "entry", "must be a boolean");
      ms.entry = s.at("entry").get<bool>();
    }
    if (s.contains("base_url")) {
      if (!s.at("base_url").is_string()) throw ManifestError(path + "base_url", "must be a string");
      ms.base_url = s.at("base_url").get<std::string>();
    }
    ms.sources = string_list(s, "sources", path);
    ms.facts = string_list(s, "facts", path);
    if (ms.sources.empty() && ms.facts.empty()) throw ManifestError(path + "sources", "service lists no sources or facts");
    if (ms.entry) ++entries;
    m.services.push_back(std::move(ms));
  }
  if (entries == 0) throw ManifestError("services", "no entry");
  if (entries > 1) throw ManifestError("services", "multiple entry");

  if (root.contains("gateway_routes")) {
    const json& routes = root.at("gateway_routes");
    if (!routes.is_array()) throw ManifestError("gateway_routes", "must be an array");
    for (std::size_t i = 0; i < routes.size(); ++i) {
      const json& r = routes[i];
      std::string path = "gateway_routes[" + std::to_string(i) + "].";
      if (!r.is_object()) throw ManifestError("gateway_routes[" + std::to_string(i) + "]", "must be an object");
      reject_unknown_keys(r, path, {"prefix", "target"});
      GatewayRoute route;
      if (!r.contains("prefix") || !r.at("prefix").is_string()) throw ManifestError(path + "prefix", "missing");
      route.prefix = r.at("prefix").get<std::string>();
      if (route.prefix.empty() || route.prefix.front() != '/') {
        throw ManifestError(path + "prefix", "must be an absolute path starting with '/'");
      }
      if (!r.contains("target") || !r.at("target").is_string()) throw ManifestError(path + "target", "missing");
      route.target = r.at("target").get<std::string>();
      if (!names.contains(route.target)) {
        throw ManifestError(path + "target", "unknown service '" + route.target + "'");
      }
      m.gateway_routes.push_back(std::move(route));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Facts

const json& field(const json& rec, const char* key, std::size_t line) {
  if (!rec.contains(key)) throw FactsError(line, std::string("missing field '") + key + "'");
  return rec.at(key);
}

std::string string_field(const json& rec, const char* key, std::size_t line, bool allow_empty = false) {
  const json& v = field(rec, key, line);
  if (!v.is_string()) throw FactsError(line, std::string("field '") + key + "' must be a string");
  std::string s = v.get<std::string>();
  if (!allow_empty && s.empty()) throw FactsError(line, std::string("field '") + key + "' must be non-empty");
  return s;
}

int positive_field(const json& rec, const char* key, std::size_t line) {
  const json& v = field(rec, key, line);
  if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 100000000) {
    throw FactsError(line, std::string("field '") + key + "' must be a positive integer");
  }
  return v.get<int>();
}

}  // namespace

Manifest parse_manifest(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ManifestError("$", std::string("invalid JSON: ") + e.what());
  }
  return manifest_from_json(root);
}

Manifest read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ManifestError("$", "cannot open " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

Service read_facts(std::istream& in, std::string_view service_name) {
  std::vector<Element> elements;
  std::vector<Edge> edges;
  std::vector<Channel> channels;
  std::vector<std::size_t> edge_lines;
  std::vector<std::size_t> channel_lines;
  std::set<std::string> ids;
  bool seen_header = false;

  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error&) {
      throw FactsError(line_no, "invalid JSON");
    }
    if (!rec.is_object()) throw FactsError(line_no, "record must be an object");
    std::string tag = string_field(rec, "rec", line_no);
    if (!seen_header) {
      if (tag != "header") throw FactsError(line_no, "first record must be the header");
      const json& v = field(rec, "version", line_no);
      if (!v.is_number_integer() || v.get<int>() != kFactsVersion) throw FactsError(line_no, "unsupported facts version");
      if (rec.contains("service") && rec.at("service") != service_name) {
        throw FactsError(line_no, "header names a different service");
      }
      seen_header = true;
      continue;
    }
    if (tag == "element") {
      Element e;
      e.id = string_field(rec, "id", line_no);
      e.service = rec.contains("service") ? string_field(rec, "service", line_no) : std::string(service_name);
      if (e.service != service_name) throw FactsError(line_no, "element belongs to service '" + e.service + "'");
      auto kind = parse_element_kind(string_field(rec, "kind", line_no));
      if (!kind) throw FactsError(line_no, "unknown element kind");
      e.kind = *kind;
      e.name = string_field(rec, "name", line_no, true);
      e.location.file = string_field(rec, "file", line_no);
      e.location.line = positive_field(rec, "line", line_no);
      e.location.col = positive_field(rec, "col", line_no);
      e.source = string_field(rec, "source", line_no, true);
      e.inferred_type = rec.contains("type") ? string_field(rec, "type", line_no) : std::string(kTypeUnknown);
      if (!is_known_type_tag(e.inferred_type)) throw FactsError(line_no, "unknown type tag '" + e.inferred_type + "'");
      if (!ids.insert(e.id).second) throw FactsError(line_no, "duplicate element id " + e.id);
      elements.push_back(std::move(e));
    } else if (tag == "edge") {
      auto kind = parse_edge_kind(string_field(rec, "kind", line_no));
      if (!kind) throw FactsError(line_no, "unknown edge kind");
      edges.push_back(Edge{*kind, string_field(rec, "from", line_no), string_field(rec, "to", line_no)});
      edge_lines.push_back(line_no);
    } else if (tag == "channel") {
      Channel c;
      c.element = string_field(rec, "element", line_no);
      auto dir = parse_channel_direction(string_field(rec, "direction", line_no));
      if (!dir) throw FactsError(line_no, "direction must be 'in' or 'out'");
      auto proto = parse_channel_protocol(string_field(rec, "protocol", line_no));
      if (!proto) throw FactsError(line_no, "protocol must be 'http' or 'topic'");
      c.direction = *dir;
      c.protocol = *proto;
      c.identifier = string_field(rec, "identifier", line_no);
      channels.push_back(std::move(c));
      channel_lines.push_back(line_no);
    } else if (tag == "header") {
      throw FactsError(line_no, "duplicate header");
    } else {
      throw FactsError(line_no, "unknown record tag '" + tag + "'");
    }
  }

  // Edges may refer forward to elements, so endpoints are checked once all
  // records are in; errors still carry the edge's own line.
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (const auto* end : {&edges[i].from, &edges[i].to}) {
      if (!ids.contains(*end)) throw FactsError(edge_lines[i], "edge endpoint " + *end + " does not exist");
    }
  }
  std::set<std::string> channel_elements;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (!ids.contains(channels[i].element)) {
      throw FactsError(channel_lines[i], "channel element " + channels[i].element + " does not exist");
    }
    if (!channel_elements.insert(channels[i].element).second) {
      throw FactsError(channel_lines[i], "duplicate channel for element " + channels[i].element);
    }
  }
  return Service(std::string(service_name), std::move(elements), std::move(edges), std::move(channels));
}

void write_facts(const Service& service, std::ostream& out) {
  if (service.elements().empty() && service.edges().empty() && service.supplied_channels().empty()) return;
  ordered_json header;
  header["rec"] = "header";
  header["version"] = kFactsVersion;
  header["service"] = service.name();
  out << header.dump() << '\n';
  for (const auto& e : service.elements()) {
    ordered_json rec;
    rec["rec"] = "element";
    rec["id"] = e.id;
    rec["service"] = e.service;
    rec["kind"] = to_string(e.kind);
    rec["name"] = e.name;
    rec["file"] = e.location.file;
    rec["line"] = e.location.line;
    rec["col"] = e.location.col;
    rec["type"] = e.inferred_type;
    rec["source"] = e.source;
    out << rec.dump() << '\n';
  }
  for (const auto& edge : service.edges()) {
    ordered_json rec;
    rec["rec"] = "edge";
    rec["kind"] = to_string(edge.kind);
    rec["from"] = edge.from;
    rec["to"] = edge.to;
    out << rec.dump() << '\n';
  }
  for (const auto& c : service.supplied_channels()) {
    ordered_json rec;
    rec["rec"] = "channel";
    rec["element"] = c.element;
    rec["direction"] = to_string(c.direction);
    rec["protocol"] = to_string(c.protocol);
    rec["identifier"] = c.identifier;
    out << rec.dump() << '\n';
  }
}

std::string write_facts(const Service& service) {
  std::ostringstream os;
  write_facts(service, os);
  return os.str();
}

}  // namespace privflow
