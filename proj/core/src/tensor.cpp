#include "pf/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "pf/errors.hpp"

namespace pf {

namespace {
std::atomic<std::int64_t> g_current_bytes{0};
std::atomic<std::int64_t> g_peak_bytes{0};

void account_alloc(std::int64_t bytes) {
    const std::int64_t now = g_current_bytes.fetch_add(bytes) + bytes;
    std::int64_t peak = g_peak_bytes.load();
    while (now > peak && !g_peak_bytes.compare_exchange_weak(peak, now)) {
    }
}

void account_free(std::int64_t bytes) { g_current_bytes.fetch_sub(bytes); }

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
        n *= e;
    }
    return n;
}
}  // namespace

std::int64_t MemStats::current_bytes() { return g_current_bytes.load(); }
std::int64_t MemStats::peak_bytes() { return g_peak_bytes.load(); }
void MemStats::reset_peak() { g_peak_bytes.store(g_current_bytes.load()); }

namespace detail {

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first needed
    bool requires_grad = false;

    TensorImpl(std::vector<int> s, std::vector<double> d, bool rg)
        : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
        account_alloc(static_cast<std::int64_t>(data.size() * sizeof(double)));
    }

    ~TensorImpl() {
        account_free(static_cast<std::int64_t>((data.size() + grad.size()) * sizeof(double)));
    }

    void ensure_grad() {
        if (grad.empty()) {
            grad.assign(data.size(), 0.0);
            account_alloc(static_cast<std::int64_t>(grad.size() * sizeof(double)));
        }
    }

    void clear_grad() {
        if (!grad.empty()) {
            account_free(static_cast<std::int64_t>(grad.size() * sizeof(double)));
            grad.clear();
            grad.shrink_to_fit();
        }
    }
};

}  // namespace detail

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    const auto n = shape_numel(shape);
    return Tensor(std::make_shared<detail::TensorImpl>(
        std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), requires_grad));
}

Tensor Tensor::ones(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return Tensor(std::make_shared<detail::TensorImpl>(
        std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value), requires_grad));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    const auto n = shape_numel(shape);
    if (static_cast<std::size_t>(n) != data.size()) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    return Tensor(
        std::make_shared<detail::TensorImpl>(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::randn(std::vector<int> shape, double stddev, Rng& rng, bool requires_grad) {
    const auto n = shape_numel(shape);
    std::vector<double> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = rng.normal(0.0, stddev);
    return Tensor(
        std::make_shared<detail::TensorImpl>(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }

int Tensor::dim(int axis) const { return impl_->shape.at(static_cast<std::size_t>(axis)); }

std::size_t Tensor::ndim() const { return impl_->shape.size(); }

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

std::span<const double> Tensor::data() const { return impl_->data; }

std::span<double> Tensor::mutable_data() const { return impl_->data; }

double Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("item() requires a scalar tensor, got " + shape_str(shape()));
    }
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool v) const { impl_->requires_grad = v; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw StateError("tensor has no gradient");
    return impl_->grad;
}

std::span<double> Tensor::mutable_grad() const {
    impl_->ensure_grad();
    return impl_->grad;
}

void Tensor::ensure_grad() const { impl_->ensure_grad(); }

void Tensor::clear_grad() const { impl_->clear_grad(); }

namespace {
thread_local Tape* t_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }

Tape::Scope::~Scope() { t_active_tape = previous_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::record(TapeNode node) { nodes_.push_back(std::move(node)); }

void Tape::clear() { nodes_.clear(); }

void Tape::backward(const Tensor& loss) {
    if (nodes_.empty()) throw StateError("backward over an empty tape");
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss");
    }
    bool found = false;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output.id() == loss.id()) {
            found = true;
            break;
        }
    }
    if (!found) throw StateError("loss was not produced on the active tape");

    // Node outputs are per-pass scratch; leaf tensors accumulate across
    // passes. Zeroing outputs up front keeps a repeated backward from
    // double-counting intermediate gradients.
    for (auto& node : nodes_) {
        Tensor out = node.output;
        out.ensure_grad();
        auto g = out.mutable_grad();
        std::fill(g.begin(), g.end(), 0.0);
    }

    Tensor seed = loss;
    seed.mutable_grad()[0] = 1.0;

    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        it->backward();
    }

    // Contract: every requires_grad tensor on the tape ends up with a grad
    // buffer, even if no gradient reached it.
    for (auto& node : nodes_) {
        for (auto& in : node.inputs) {
            if (in.requires_grad()) in.ensure_grad();
        }
        if (node.output.requires_grad()) node.output.ensure_grad();
    }
}

void backward(const Tensor& loss) {
    Tape* tape = Tape::active();
    if (!tape) throw StateError("backward requires an active tape");
    tape->backward(loss);
}

}  // namespace pf
