#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace privflow {

struct Location {
  std::string file;
  int line = 1;  // 1-based
  int col = 1;   // 1-based, byte column

  auto operator<=>(const Location&) const = default;
  bool operator==(const Location&) const = default;
};

std::string to_string(const Location& loc);

enum class ElementKind {
  function,
  class_,
  variable,
  parameter,
  call,
  field_access,
  assignment,
  conditional,
  decorator,
  string_literal,
  return_stmt,
  endpoint,
};

inline constexpr std::size_t kElementKindCount = 12;

std::string_view to_string(ElementKind kind);
std::optional<ElementKind> parse_element_kind(std::string_view text);

enum class EdgeKind { calls, dataflow, contains, decorates };

inline constexpr std::size_t kEdgeKindCount = 4;

std::string_view to_string(EdgeKind kind);
std::optional<EdgeKind> parse_edge_kind(std::string_view text);

/// Closed vocabulary of inferred types.
inline constexpr std::string_view kTypeInt = "int";
inline constexpr std::string_view kTypeString = "string";
inline constexpr std::string_view kTypeBool = "bool";
inline constexpr std::string_view kTypeObject = "object";
inline constexpr std::string_view kTypeFunction = "function";
inline constexpr std::string_view kTypeUnknown = "unknown";

bool is_known_type_tag(std::string_view tag);

using ElementId = std::string;

/// Deterministic element id: FNV-1a over (service, file, line, col, kind).
ElementId make_element_id(std::string_view service, const Location& loc, ElementKind kind);

/// 64-bit FNV-1a. Used for ids, path ids and anything else that must be
/// stable across runs and platforms.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

struct Element {
  ElementId id;
  std::string service;
  ElementKind kind = ElementKind::variable;
  std::string name;  // empty for anonymous elements
  Location location;
  std::string source;
  std::string inferred_type{kTypeUnknown};

  bool operator==(const Element&) const = default;
};

struct Edge {
  EdgeKind kind = EdgeKind::dataflow;
  ElementId from;
  ElementId to;

  auto operator<=>(const Edge&) const = default;
  bool operator==(const Edge&) const = default;
};

enum class ChannelDirection { out, in };
enum class ChannelProtocol { http, topic };

std::string_view to_string(ChannelDirection dir);
std::string_view to_string(ChannelProtocol proto);
std::optional<ChannelDirection> parse_channel_direction(std::string_view text);
std::optional<ChannelProtocol> parse_channel_protocol(std::string_view text);

/// An inter-service communication point. Out-channels sit on outbound
/// intrinsic call sites, in-channels on endpoints and consumers.
struct Channel {
  ElementId element;
  ChannelDirection direction = ChannelDirection::out;
  ChannelProtocol protocol = ChannelProtocol::http;
  std::string identifier;

  bool operator==(const Channel&) const = default;
};

enum class FlowEdgeKind {
  dataflow,        // raw def-use edge from the facts
  return_value,    // callee return statement -> call site
  parameter_of,    // parameter -> owning function
  endpoint_input,  // endpoint -> handler parameters and request.param sites
};

std::string_view to_string(FlowEdgeKind kind);

struct FlowEdge {
  std::size_t to = 0;
  FlowEdgeKind kind = FlowEdgeKind::dataflow;

  bool operator==(const FlowEdge&) const = default;
};

/// Dataflow graph over the element indices of one service, closed under the
/// propagation rules. Successor lists are sorted by target index, which is
/// location order.
struct FlowGraph {
  std::vector<std::vector<FlowEdge>> succ;

  std::size_t node_count() const { return succ.size(); }
  std::size_t edge_count() const;
  bool has_edge(std::size_t from, std::size_t to) const;
};

namespace detail {
/// Derived search structures, built once per service on first use.
struct FlowSlot {
  std::once_flag once;
  FlowGraph graph;
  std::vector<std::size_t> owner;  // enclosing function index, or npos
  std::vector<std::vector<std::size_t>> callees;  // function-level call graph
  std::vector<std::vector<std::size_t>> callers;
};
struct ServiceIndex;
}  // namespace detail

/// One service's immutable facts. Elements are kept sorted by
/// (file, line, col, kind); edges by (kind, from position, to position).
/// Dangling edges and duplicate ids are tolerated here so that
/// validate_program can report them.
class Service {
 public:
  Service();
  Service(std::string name, std::vector<Element> elements, std::vector<Edge> edges,
          std::vector<Channel> supplied_channels = {}, bool entry = false);

  const std::string& name() const { return name_; }
  bool entry() const { return entry_; }
  std::span<const Element> elements() const { return elements_; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const Channel> supplied_channels() const { return channels_; }

  const Element* find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  const Element& at(std::size_t index) const { return elements_[index]; }
  std::size_t size() const { return elements_.size(); }

  /// Adjacency over resolved (non-dangling) edges, by element index.
  std::span<const std::size_t> out(EdgeKind kind, std::size_t index) const;
  std::span<const std::size_t> in(EdgeKind kind, std::size_t index) const;

  Service with_entry(bool entry) const;

  detail::FlowSlot& flow_slot() const { return *flow_; }

  /// Structural equality: name, entry flag, elements, edges, channels.
  bool operator==(const Service& other) const;

 private:
  std::string name_;
  std::vector<Element> elements_;
  std::vector<Edge> edges_;
  std::vector<Channel> channels_;
  bool entry_ = false;
  std::shared_ptr<const detail::ServiceIndex> index_;
  std::shared_ptr<detail::FlowSlot> flow_;
};

struct ManifestService {
  std::string name;
  bool entry = false;
  std::string base_url;
  std::vector<std::string> sources;  // .msv files, relative to the manifest
  std::vector<std::string> facts;    // .facts.jsonl files, relative to the manifest

  bool operator==(const ManifestService&) const = default;
};

struct GatewayRoute {
  std::string prefix;
  std::string target;

  bool operator==(const GatewayRoute&) const = default;
};

struct Manifest {
  int version = 1;
  std::vector<ManifestService> services;
  std::vector<GatewayRoute> gateway_routes;

  bool operator==(const Manifest&) const = default;
};

struct ElementRef {
  const Service* service = nullptr;
  const Element* element = nullptr;
};

struct Program {
  std::vector<Service> services;
  Manifest manifest;

  const Service* service(std::string_view name) const;
  const Service* entry_service() const;
  /// Searches every service; ids are globally unique because they hash the
  /// service name.
  ElementRef find(std::string_view id) const;
};

enum class ViolationKind {
  duplicate_service,
  duplicate_id,
  dangling_edge,
  no_entry_service,
  multiple_entry_services,
  foreign_element,
  bad_location,
  dangling_channel,
};

std::string_view to_string(ViolationKind kind);

struct IntegrityViolation {
  ViolationKind kind;
  std::string service;
  std::string subject;  // offending id or name

  bool operator==(const IntegrityViolation&) const = default;
};

std::string describe(const IntegrityViolation& v);

std::vector<IntegrityViolation> validate_program(const Program& program);

}  // namespace privflow
