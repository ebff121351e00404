#pragma once

// Low-level numeric kernels on raw row-major buffers. These are the hot
// loops; they are parallelized with OpenMP over output elements so every
// accumulation stays inside one thread and results do not depend on the
// thread count. A naive serial mirror of each kernel lives with the tests
// and is used as the correctness oracle; the bench target compares the two.

namespace vistrack::kernels {

// y[M,N] = a[M,K] * b[K,N]
void matmul(const double* a, const double* b, double* y, int m, int k, int n);
// y[M,N] = a[K,M]^T * b[K,N]
void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n);
// y[M,N] = a[M,K] * b[N,K]^T
void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n);

// out[c,p] = sum_k w[c,k] * in[k,p] + bias[c], p over npix pixels
void conv1x1_forward(const double* in, const double* w, const double* bias,
                     double* out, int cin, int cout, int npix);
void conv1x1_backward_input(const double* gout, const double* w, double* gin,
                            int cin, int cout, int npix);
void conv1x1_backward_weights(const double* gout, const double* in, double* gw,
                              int cin, int cout, int npix);
void conv1x1_backward_bias(const double* gout, double* gb, int cout, int npix);

// Per-channel valid cross-correlation of a (th,tw) template over a search
// grid zero-padded by (pad_top,pad_left) = (th/2, tw/2) when padded.
// out extents: oh = sh + pt + pb - th + 1 with pb = th - 1 - pt (same for w).
void xcorr_forward(const double* tmpl, const double* search, double* out,
                   int channels, int th, int tw, int sh, int sw,
                   int pad_top, int pad_left, int oh, int ow);
void xcorr_backward_template(const double* gout, const double* search, double* gtmpl,
                             int channels, int th, int tw, int sh, int sw,
                             int pad_top, int pad_left, int oh, int ow);
void xcorr_backward_search(const double* gout, const double* tmpl, double* gsearch,
                           int channels, int th, int tw, int sh, int sw,
                           int pad_top, int pad_left, int oh, int ow);

// ROI align on [C,H,W] features. The box is in continuous cell coordinates:
// the image spans [0,W]x[0,H] and pixel (ix,iy) is centered at (ix+.5,iy+.5).
// Each output bin averages samples*samples bilinear reads at regular sub-bin
// offsets; reads outside the grid return zero.
void roi_align_forward(const double* feat, double* out, int channels, int h, int w,
                       double box_x, double box_y, double box_w, double box_h,
                       int out_h, int out_w, int samples);
void roi_align_backward(const double* gout, double* gfeat, int channels, int h, int w,
                        double box_x, double box_y, double box_w, double box_h,
                        int out_h, int out_w, int samples);

}  // namespace vistrack::kernels
