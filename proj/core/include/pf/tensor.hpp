#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pf/rng.hpp"

namespace pf {

/// Allocator-level accounting of live tensor payload bytes (data + grad).
/// The high-water mark backs the peak-memory input of the efficiency
/// score, so it is deterministic by construction.
struct MemStats {
    static std::int64_t current_bytes();
    static std::int64_t peak_bytes();
    static void reset_peak();
};

namespace detail {
struct TensorImpl;
}

/// Dense f64 tensor with row-major flat storage. Shapes are lists of
/// positive extents; broadcasting is limited to trailing-vector affine
/// forms in the ops that allow it. Value-semantics handle: copies share
/// storage, and tensors are treated as immutable once created except for
/// optimizer updates through mutable_data().
class Tensor {
   public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor ones(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    /// Normal init with mean 0 and the given stddev.
    static Tensor randn(std::vector<int> shape, double stddev, Rng& rng,
                        bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const;
    int dim(int axis) const;
    std::size_t ndim() const;
    std::int64_t numel() const;

    std::span<const double> data() const;
    /// Direct write access; reserved for the optimizer, checkpoint
    /// restore, and backward closures. Tensor is a shared handle, so
    /// these are const in the shared_ptr sense.
    std::span<double> mutable_data() const;

    double item() const;  // scalar tensors only

    bool requires_grad() const;
    void set_requires_grad(bool v) const;

    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad() const;
    /// Allocates a zero grad buffer if absent.
    void ensure_grad() const;
    void clear_grad() const;

    /// Identity of the underlying storage; used by the tape.
    const void* id() const { return impl_.get(); }

    detail::TensorImpl* impl() const { return impl_.get(); }

   private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;
    friend class Tape;
};

std::string shape_str(const std::vector<int>& shape);

/// One executed operation: inputs, output, and a closure that pushes the
/// output gradient back to the inputs.
struct TapeNode {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
};

/// Ordered record of executed operations. Ops append nodes in execution
/// order, so the record is topologically sorted by construction. A tape
/// is made current with Tape::Scope; with no active tape, ops run in
/// inference mode and record nothing.
class Tape {
   public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// RAII activation for the current thread.
    class Scope {
       public:
        explicit Scope(Tape& tape);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

       private:
        Tape* previous_;
    };

    static Tape* active();

    void record(TapeNode node);
    void clear();
    std::size_t size() const { return nodes_.size(); }

    /// Reverse sweep from a scalar loss recorded on this tape. Populates
    /// grad for every requires_grad tensor the tape touched; existing
    /// grads accumulate.
    void backward(const Tensor& loss);

   private:
    std::vector<TapeNode> nodes_;
};

/// Convenience: backward on the active tape.
void backward(const Tensor& loss);

}  // namespace pf
