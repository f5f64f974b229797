#ifndef CTQ_PERSIST_HPP
#define CTQ_PERSIST_HPP

#include "ctq/baseline3d.hpp"
#include "ctq/codec.hpp"
#include "ctq/convention.hpp"
#include "ctq/qr_index.hpp"
#include "ctq/query.hpp"

#include <boost/crc.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <variant>

/// \file
/// Index files: magic, version, kind, then four checksummed sections
/// (parameters, trees, registries, pages). The byte layout is described in
/// docs/index_format.md.

namespace ctq {

inline constexpr std::string_view kIndexMagic = "CTQINDEX";
inline constexpr std::uint32_t kIndexVersion = 1;

enum class IndexKind : std::uint32_t { qr = 1, q2r = 2, baseline = 3 };

using AnyIndex = std::variant<QRIndex, Q2RIndex, RTree3>;

/// A built index together with the convention its input was read under.
struct IndexFile {
    IngestConvention convention;
    std::int64_t window_days = 0;
    AnyIndex index;
};

inline IndexKind kind_of(const AnyIndex& index) {
    return static_cast<IndexKind>(index.index() + 1);
}

inline const PageStore& pages_of(const AnyIndex& index) {
    return std::visit([](const auto& i) -> const PageStore& { return *i.pages; }, index);
}

namespace detail {

inline constexpr std::uint32_t tag(const char (&s)[5]) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0]))
           | static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8
           | static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16
           | static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

inline constexpr std::uint32_t kTagParams = tag("PARM");
inline constexpr std::uint32_t kTagTrees = tag("TREE");
inline constexpr std::uint32_t kTagRegistry = tag("REGS");
inline constexpr std::uint32_t kTagPages = tag("PAGE");

inline std::uint32_t crc32(std::string_view bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

inline void put_section(ByteWriter& out, std::uint32_t section, const ByteWriter& payload) {
    out.u32(section);
    out.u64(payload.size());
    out.bytes(payload.str());
    out.u32(crc32(payload.str()));
}

inline std::string_view get_section(ByteReader& in, std::uint32_t section) {
    if (in.u32() != section)
        throw FormatError("unexpected section tag");
    const std::uint64_t len = in.u64();
    if (len > in.remaining())
        throw FormatError("truncated section");
    const auto payload = in.bytes(static_cast<std::size_t>(len));
    if (in.u32() != crc32(payload))
        throw FormatError("section checksum mismatch");
    return payload;
}

inline void put_region(ByteWriter& w, const Region& r) {
    w.f64(r.min_x);
    w.f64(r.min_y);
    w.f64(r.max_x);
    w.f64(r.max_y);
}

inline Region get_region(ByteReader& r) {
    Region g;
    g.min_x = r.f64();
    g.min_y = r.f64();
    g.max_x = r.f64();
    g.max_y = r.f64();
    return g;
}

inline void put_qr_params(ByteWriter& w, const QrParams& p) {
    w.u32(p.theta);
    w.u32(p.page_capacity);
    w.i64(p.bucket_width);
    w.u32(p.max_depth);
}

inline QrParams get_qr_params(ByteReader& r) {
    QrParams p;
    p.theta = r.u32();
    p.page_capacity = r.u32();
    p.bucket_width = r.i64();
    p.max_depth = r.u32();
    try {
        validate(p);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("bad parameters: ") + e.what());
    }
    return p;
}

inline void put_quadtree(ByteWriter& w, const QuadTree& t) {
    put_region(w, t.root_region);
    w.u32(t.capacity);
    w.u32(t.max_depth);
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
        put_region(w, n.region);
        w.u32(n.depth);
        w.u32(n.cx);
        w.u32(n.cy);
        w.u32(n.first_child);
        w.u64(n.point_count);
    }
}

inline QuadTree get_quadtree(ByteReader& r) {
    QuadTree t;
    t.root_region = get_region(r);
    t.capacity = r.u32();
    t.max_depth = r.u32();
    t.nodes.resize(r.count(56));
    if (t.nodes.empty())
        throw FormatError("quadtree without a root");
    for (auto& n : t.nodes) {
        n.region = get_region(r);
        n.depth = r.u32();
        n.cx = r.u32();
        n.cy = r.u32();
        n.first_child = r.u32();
        n.point_count = r.u64();
        if (n.first_child != kNoNode && (n.first_child == 0 || std::uint64_t{n.first_child} + 4 > t.nodes.size()))
            throw FormatError("quadtree child index out of range");
        if (n.depth > kMaxSupportedDepth)
            throw FormatError("quadtree node depth out of range");
    }
    return t;
}

inline void put_registry(ByteWriter& w, const QRIndex& i) {
    w.u64(i.registry.size());
    for (const auto& entries : i.registry) {
        w.u64(entries.size());
        for (const auto& e : entries) {
            w.u64(e.page_id);
            w.u64(e.bucket_min);
            w.u64(e.bucket_max);
        }
    }
    w.u64(i.assignments.size());
    for (const auto& a : i.assignments) {
        w.u64(a.page_id);
        w.u64(a.members.size());
        for (auto u : a.members)
            w.u64(u);
    }
}

inline void get_registry(ByteReader& r, QRIndex& i, std::size_t page_total) {
    i.registry.resize(r.count(8));
    if (i.registry.size() != i.tree.nodes.size())
        throw FormatError("registry does not match the quadtree");
    for (auto& entries : i.registry) {
        entries.resize(r.count(24));
        for (auto& e : entries) {
            e.page_id = r.u64();
            e.bucket_min = r.u64();
            e.bucket_max = r.u64();
            if (e.page_id >= page_total)
                throw FormatError("registry references an unknown page");
        }
    }
    i.assignments.resize(r.count(16));
    for (auto& a : i.assignments) {
        a.page_id = r.u64();
        if (a.page_id >= page_total)
            throw FormatError("assignment references an unknown page");
        a.members.resize(r.count(8));
        for (auto& u : a.members)
            u = r.u64();
    }
}

inline void put_box(ByteWriter& w, const Box3& b) {
    w.f64(b.min_x);
    w.f64(b.max_x);
    w.f64(b.min_y);
    w.f64(b.max_y);
    w.i64(b.min_t);
    w.i64(b.max_t);
}

inline Box3 get_box(ByteReader& r) {
    Box3 b;
    b.min_x = r.f64();
    b.max_x = r.f64();
    b.min_y = r.f64();
    b.max_y = r.f64();
    b.min_t = r.i64();
    b.max_t = r.i64();
    return b;
}

inline void expect_done(const ByteReader& r, const char* what) {
    if (!r.done())
        throw FormatError(std::string("trailing bytes in ") + what + " section");
}

} // namespace detail

/// Serializes `file` to its on-disk byte representation. The output depends
/// only on the index contents, so equal indexes give identical bytes.
inline std::string serialize_index(const IndexFile& file) {
    ByteWriter params, trees, regs, pages;

    params.u8(file.convention.geographic ? 1 : 0);
    params.f64(file.convention.lat0);
    params.f64(file.convention.lon0);
    params.i64(file.convention.time_offset);
    params.i64(file.window_days);

    std::visit(
        [&](const auto& index) {
            using T = std::decay_t<decltype(index)>;
            if constexpr (std::is_same_v<T, QRIndex>) {
                detail::put_qr_params(params, index.params);
                params.i64(index.bucketing.epoch);
                detail::put_quadtree(trees, index.tree);
                detail::put_registry(regs, index);
            } else if constexpr (std::is_same_v<T, Q2RIndex>) {
                detail::put_qr_params(params, index.params.qr);
                params.u32(index.params.theta_traj);
                params.i64(index.bucketing.epoch);
                detail::put_region(params, index.root_region);
                trees.u64(index.nodes.size());
                for (const auto& n : index.nodes) {
                    detail::put_region(trees, n.block);
                    trees.u32(n.depth);
                    trees.u32(n.first_child);
                    trees.u64(n.owned.size());
                    for (auto u : n.owned)
                        trees.u64(u);
                    trees.u8(n.qr ? 1 : 0);
                    if (n.qr)
                        detail::put_quadtree(trees, n.qr->tree);
                }
                for (const auto& n : index.nodes)
                    if (n.qr)
                        detail::put_registry(regs, *n.qr);
            } else {
                params.u32(index.page_capacity);
                params.u32(index.fanout);
                params.u32(index.root);
                trees.u64(index.nodes.size());
                for (const auto& n : index.nodes) {
                    detail::put_box(trees, n.box);
                    trees.u8(n.leaf ? 1 : 0);
                    trees.u64(n.children.size());
                    for (auto c : n.children)
                        trees.u32(c);
                    trees.u64(n.page);
                    trees.u64(n.members.size());
                    for (auto u : n.members)
                        trees.u64(u);
                }
            }
        },
        file.index);

    const PageStore& store = pages_of(file.index);
    pages.u64(store.page_count());
    for (PageId id = 0; id < store.page_count(); ++id) {
        pages.u64(store.raw(id).size());
        pages.bytes(store.raw(id));
    }

    ByteWriter out;
    out.bytes(kIndexMagic);
    out.u32(kIndexVersion);
    out.u32(static_cast<std::uint32_t>(kind_of(file.index)));
    detail::put_section(out, detail::kTagParams, params);
    detail::put_section(out, detail::kTagTrees, trees);
    detail::put_section(out, detail::kTagRegistry, regs);
    detail::put_section(out, detail::kTagPages, pages);
    return std::move(out).str();
}

/// Parses an index file. Throws FormatError on a bad magic, an unsupported
/// version, truncation, a checksum mismatch or inconsistent contents.
inline IndexFile deserialize_index(std::string_view bytes) {
    ByteReader in(bytes);
    if (in.remaining() < kIndexMagic.size() || in.bytes(kIndexMagic.size()) != kIndexMagic)
        throw FormatError("not an index file");
    const std::uint32_t version = in.u32();
    if (version != kIndexVersion)
        throw FormatError("unsupported index version " + std::to_string(version));
    const std::uint32_t kind = in.u32();
    if (kind < 1 || kind > 3)
        throw FormatError("unknown index kind " + std::to_string(kind));

    ByteReader params(detail::get_section(in, detail::kTagParams));
    ByteReader trees(detail::get_section(in, detail::kTagTrees));
    ByteReader regs(detail::get_section(in, detail::kTagRegistry));
    ByteReader page_bytes(detail::get_section(in, detail::kTagPages));
    detail::expect_done(in, "file");

    auto store = std::make_shared<PageStore>();
    const std::size_t page_total = page_bytes.count(8);
    for (std::size_t i = 0; i < page_total; ++i) {
        const std::uint64_t len = page_bytes.u64();
        if (len > page_bytes.remaining())
            throw FormatError("truncated page");
        store->append_raw(std::string(page_bytes.bytes(static_cast<std::size_t>(len))));
    }
    detail::expect_done(page_bytes, "page");
    store->seal();

    IndexFile file;
    file.convention.geographic = params.u8() != 0;
    file.convention.lat0 = params.f64();
    file.convention.lon0 = params.f64();
    file.convention.time_offset = params.i64();
    file.window_days = params.i64();

    switch (static_cast<IndexKind>(kind)) {
    case IndexKind::qr: {
        QRIndex index;
        index.params = detail::get_qr_params(params);
        index.bucketing = {params.i64(), index.params.bucket_width};
        index.tree = detail::get_quadtree(trees);
        detail::get_registry(regs, index, page_total);
        index.pages = store;
        file.index = std::move(index);
        break;
    }
    case IndexKind::q2r: {
        Q2RIndex index;
        index.params.qr = detail::get_qr_params(params);
        index.params.theta_traj = params.u32();
        index.bucketing = {params.i64(), index.params.qr.bucket_width};
        index.root_region = detail::get_region(params);
        index.pages = store;
        index.nodes.resize(trees.count(40));
        for (auto& n : index.nodes) {
            n.block = detail::get_region(trees);
            n.depth = trees.u32();
            n.first_child = trees.u32();
            if (n.first_child != kNoNode
                && (n.first_child == 0 || std::uint64_t{n.first_child} + 4 > index.nodes.size()))
                throw FormatError("top-level child index out of range");
            n.owned.resize(trees.count(8));
            for (auto& u : n.owned)
                u = trees.u64();
            if (trees.u8() != 0) {
                QRIndex qr;
                qr.params = index.params.qr;
                qr.bucketing = index.bucketing;
                qr.tree = detail::get_quadtree(trees);
                qr.pages = store;
                n.qr = std::move(qr);
            }
        }
        for (auto& n : index.nodes)
            if (n.qr)
                detail::get_registry(regs, *n.qr, page_total);
        file.index = std::move(index);
        break;
    }
    case IndexKind::baseline: {
        RTree3 tree;
        tree.page_capacity = params.u32();
        tree.fanout = params.u32();
        tree.root = params.u32();
        tree.pages = store;
        tree.nodes.resize(trees.count(73));
        for (auto& n : tree.nodes) {
            n.box = detail::get_box(trees);
            n.leaf = trees.u8() != 0;
            n.children.resize(trees.count(4));
            for (auto& c : n.children) {
                c = trees.u32();
                if (c >= tree.nodes.size())
                    throw FormatError("r-tree child index out of range");
            }
            n.page = trees.u64();
            if (n.leaf && n.page >= page_total)
                throw FormatError("r-tree leaf references an unknown page");
            n.members.resize(trees.count(8));
            for (auto& u : n.members)
                u = trees.u64();
        }
        if (!tree.nodes.empty() && tree.root >= tree.nodes.size())
            throw FormatError("r-tree root out of range");
        file.index = std::move(tree);
        break;
    }
    }
    detail::expect_done(params, "parameter");
    detail::expect_done(trees, "tree");
    detail::expect_done(regs, "registry");
    return file;
}

inline void save_index(const std::filesystem::path& path, const IndexFile& file) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string bytes = serialize_index(file);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("failed writing " + path.string());
}

inline IndexFile load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_index(bytes);
}

/// Runs a contact tracing query on whichever index the file holds.
inline TraceResult trace_any(const AnyIndex& index, const Trajectory& q, const QueryParams& params) {
    return std::visit(
        [&](const auto& i) {
            if constexpr (std::is_same_v<std::decay_t<decltype(i)>, RTree3>)
                return query_baseline(i, q, params);
            else
                return trace(i, q, params);
        },
        index);
}

} // namespace ctq

#endif // CTQ_PERSIST_HPP
