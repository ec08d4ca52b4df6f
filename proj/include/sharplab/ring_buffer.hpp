#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sharplab {

/// Fixed-capacity FIFO; pushing into a full buffer evicts the oldest entry.
/// Index 0 is the oldest element.
template <typename T>
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity = 0) : data_(capacity) {}

    std::size_t capacity() const noexcept { return data_.size(); }
    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }
    bool full() const noexcept { return size_ == data_.size(); }

    void push(const T& value) {
        if (data_.empty()) throw std::logic_error("RingBuffer: zero capacity");
        data_[(head_ + size_) % data_.size()] = value;
        if (full())
            head_ = (head_ + 1) % data_.size();
        else
            ++size_;
    }

    const T& operator[](std::size_t i) const { return data_[(head_ + i) % data_.size()]; }
    const T& back() const { return (*this)[size_ - 1]; }

    void clear() noexcept {
        head_ = 0;
        size_ = 0;
    }

    std::vector<T> to_vector() const {
        std::vector<T> out;
        out.reserve(size_);
        for (std::size_t i = 0; i < size_; ++i) out.push_back((*this)[i]);
        return out;
    }

private:
    std::vector<T> data_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

}  // namespace sharplab
