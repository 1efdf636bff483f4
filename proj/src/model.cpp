#include "privflow/model.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <tuple>

namespace privflow {

namespace {

constexpr std::array<std::string_view, kElementKindCount> kKindNames = {
    "function",   "class",       "variable",  "parameter",      "call",        "field_access",
    "assignment", "conditional", "decorator", "string_literal", "return_stmt", "endpoint",
};

constexpr std::array<std::string_view, kEdgeKindCount> kEdgeNames = {"calls", "dataflow", "contains", "decorates"};

}  // namespace

namespace detail {

struct ServiceIndex {
  std::unordered_map<std::string, std::size_t> by_id;
  // [kind][element] -> neighbour indices, sorted
  std::array<std::vector<std::vector<std::size_t>>, kEdgeKindCount> out;
  std::array<std::vector<std::vector<std::size_t>>, kEdgeKindCount> in;
};

}  // namespace detail

std::string to_string(const Location& loc) {
  return loc.file + ":" + std::to_string(loc.line) + ":" + std::to_string(loc.col);
}

std::string_view to_string(ElementKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<ElementKind> parse_element_kind(std::string_view text) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == text) return static_cast<ElementKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(EdgeKind kind) { return kEdgeNames[static_cast<std::size_t>(kind)]; }

std::optional<EdgeKind> parse_edge_kind(std::string_view text) {
  for (std::size_t i = 0; i < kEdgeNames.size(); ++i) {
    if (kEdgeNames[i] == text) return static_cast<EdgeKind>(i);
  }
  return std::nullopt;
}

bool is_known_type_tag(std::string_view tag) {
  return tag == kTypeInt || tag == kTypeString || tag == kTypeBool || tag == kTypeObject || tag == kTypeFunction ||
         tag == kTypeUnknown;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

ElementId make_element_id(std::string_view service, const Location& loc, ElementKind kind) {
  std::string key;
  key.reserve(service.size() + loc.file.size() + 32);
  key.append(service).push_back('\x1f');
  key.append(loc.file).push_back('\x1f');
  key.append(std::to_string(loc.line)).push_back('\x1f');
  key.append(std::to_string(loc.col)).push_back('\x1f');
  key.append(to_string(kind));
  return "e" + hex64(fnv1a(key));
}

std::string_view to_string(ChannelDirection dir) { return dir == ChannelDirection::out ? "out" : "in"; }

std::string_view to_string(ChannelProtocol proto) { return proto == ChannelProtocol::http ? "http" : "topic"; }

std::optional<ChannelDirection> parse_channel_direction(std::string_view text) {
  if (text == "out") return ChannelDirection::out;
  if (text == "in") return ChannelDirection::in;
  return std::nullopt;
}

std::optional<ChannelProtocol> parse_channel_protocol(std::string_view text) {
  if (text == "http") return ChannelProtocol::http;
  if (text == "topic") return ChannelProtocol::topic;
  return std::nullopt;
}

std::string_view to_string(FlowEdgeKind kind) {
  switch (kind) {
    case FlowEdgeKind::dataflow: return "dataflow";
    case FlowEdgeKind::return_value: return "return";
    case FlowEdgeKind::parameter_of: return "parameter_of";
    case FlowEdgeKind::endpoint_input: return "endpoint_input";
  }
  return "dataflow";
}

std::size_t FlowGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& s : succ) n += s.size();
  return n;
}

bool FlowGraph::has_edge(std::size_t from, std::size_t to) const {
  if (from >= succ.size()) return false;
  const auto& s = succ[from];
  auto it = std::lower_bound(s.begin(), s.end(), to, [](const FlowEdge& e, std::size_t t) { return e.to < t; });
  return it != s.end() && it->to == to;
}

// ---------------------------------------------------------------------------
// Service

namespace {

bool element_order(const Element& a, const Element& b) {
  if (a.location != b.location) return a.location < b.location;
  if (a.kind != b.kind) return a.kind < b.kind;
  return a.id < b.id;
}

}  // namespace

Service::Service() : Service("", {}, {}, {}, false) {}

Service::Service(std::string name, std::vector<Element> elements, std::vector<Edge> edges,
                 std::vector<Channel> supplied_channels, bool entry)
    : name_(std::move(name)),
      elements_(std::move(elements)),
      edges_(std::move(edges)),
      channels_(std::move(supplied_channels)),
      entry_(entry),
      flow_(std::make_shared<detail::FlowSlot>()) {
  std::stable_sort(elements_.begin(), elements_.end(), element_order);

  auto index = std::make_shared<detail::ServiceIndex>();
  index->by_id.reserve(elements_.size());
  for (std::size_t i = 0; i < elements_.size(); ++i) index->by_id.emplace(elements_[i].id, i);

  auto position = [&](const ElementId& id) -> std::size_t {
    auto it = index->by_id.find(id);
    return it == index->by_id.end() ? elements_.size() : it->second;
  };
  std::sort(edges_.begin(), edges_.end(), [&](const Edge& a, const Edge& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    auto pa = position(a.from), pb = position(b.from);
    if (pa != pb) return pa < pb;
    auto qa = position(a.to), qb = position(b.to);
    if (qa != qb) return qa < qb;
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  for (std::size_t k = 0; k < kEdgeKindCount; ++k) {
    index->out[k].assign(elements_.size(), {});
    index->in[k].assign(elements_.size(), {});
  }
  for (const Edge& e : edges_) {
    auto f = position(e.from), t = position(e.to);
    if (f == elements_.size() || t == elements_.size()) continue;
    auto k = static_cast<std::size_t>(e.kind);
    index->out[k][f].push_back(t);
    index->in[k][t].push_back(f);
  }
  for (std::size_t k = 0; k < kEdgeKindCount; ++k) {
    for (auto& v : index->out[k]) std::sort(v.begin(), v.end());
    for (auto& v : index->in[k]) std::sort(v.begin(), v.end());
  }

  std::sort(channels_.begin(), channels_.end(), [&](const Channel& a, const Channel& b) {
    auto pa = position(a.element), pb = position(b.element);
    if (pa != pb) return pa < pb;
    return std::tie(a.element, a.direction, a.identifier) < std::tie(b.element, b.direction, b.identifier);
  });
  index_ = std::move(index);
}

const Element* Service::find(std::string_view id) const {
  auto idx = index_of(id);
  return idx ? &elements_[*idx] : nullptr;
}

std::optional<std::size_t> Service::index_of(std::string_view id) const {
  auto it = index_->by_id.find(std::string(id));
  if (it == index_->by_id.end()) return std::nullopt;
  return it->second;
}

std::span<const std::size_t> Service::out(EdgeKind kind, std::size_t index) const {
  return index_->out[static_cast<std::size_t>(kind)][index];
}

std::span<const std::size_t> Service::in(EdgeKind kind, std::size_t index) const {
  return index_->in[static_cast<std::size_t>(kind)][index];
}

Service Service::with_entry(bool entry) const { return Service(name_, elements_, edges_, channels_, entry); }

bool Service::operator==(const Service& other) const {
  return name_ == other.name_ && entry_ == other.entry_ && elements_ == other.elements_ && edges_ == other.edges_ &&
         channels_ == other.channels_;
}

// ---------------------------------------------------------------------------
// Program

const Service* Program::service(std::string_view name) const {
  for (const auto& s : services) {
    if (s.name() == name) return &s;
  }
  return nullptr;
}

const Service* Program::entry_service() const {
  for (const auto& s : services) {
    if (s.entry()) return &s;
  }
  return nullptr;
}

ElementRef Program::find(std::string_view id) const {
  for (const auto& s : services) {
    if (const Element* e = s.find(id)) return {&s, e};
  }
  return {};
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::duplicate_service: return "DuplicateService";
    case ViolationKind::duplicate_id: return "DuplicateId";
    case ViolationKind::dangling_edge: return "DanglingEdge";
    case ViolationKind::no_entry_service: return "NoEntryService";
    case ViolationKind::multiple_entry_services: return "MultipleEntryServices";
    case ViolationKind::foreign_element: return "ForeignElement";
    case ViolationKind::bad_location: return "BadLocation";
    case ViolationKind::dangling_channel: return "DanglingChannel";
  }
  return "Unknown";
}

std::string describe(const IntegrityViolation& v) {
  std::string out(to_string(v.kind));
  if (!v.subject.empty()) out += "(" + v.subject + ")";
  if (!v.service.empty()) out += " in service " + v.service;
  return out;
}

std::vector<IntegrityViolation> validate_program(const Program& program) {
  std::vector<IntegrityViolation> out;
  std::set<std::string> names;
  std::size_t entries = 0;
  for (const auto& s : program.services) {
    if (!names.insert(s.name()).second) out.push_back({ViolationKind::duplicate_service, s.name(), s.name()});
    if (s.entry()) ++entries;

    std::set<std::string_view> ids;
    for (const auto& e : s.elements()) {
      if (!ids.insert(e.id).second) out.push_back({ViolationKind::duplicate_id, s.name(), e.id});
      if (e.service != s.name()) out.push_back({ViolationKind::foreign_element, s.name(), e.id});
      if (e.location.line < 1 || e.location.col < 1 || e.location.file.empty()) {
        out.push_back({ViolationKind::bad_location, s.name(), e.id});
      }
    }
    std::set<std::string_view> dangling;
    for (const auto& edge : s.edges()) {
      for (const auto* end : {&edge.from, &edge.to}) {
        if (!ids.contains(*end) && dangling.insert(*end).second) {
          out.push_back({ViolationKind::dangling_edge, s.name(), *end});
        }
      }
    }
    for (const auto& ch : s.supplied_channels()) {
      if (!ids.contains(ch.element)) out.push_back({ViolationKind::dangling_channel, s.name(), ch.element});
    }
  }
  if (entries == 0) out.push_back({ViolationKind::no_entry_service, "", ""});
  if (entries > 1) out.push_back({ViolationKind::multiple_entry_services, "", ""});
  return out;
}

}  // namespace privflow
