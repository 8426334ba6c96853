#pragma once

#include <string_view>

// Built-in copies of the baseline layer specs shipped under specs/. The

// verification suite uses these so it runs independent of the working

// directory; a test asserts the files and these strings stay identical.

namespace sadnn::baselines {

inline constexpr std::string_view resnet18_spec = R"SPEC(# ResNet-18 with a 14-class head
input c=3 h=224 w=224
conv2d out=64 k=7 stride=2 pad=3
batchnorm
relu
maxpool k=3 stride=2 pad=1
# stage 1 block 1
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
# stage 1 block 2
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
# stage 2 block 1
conv2d out=128 k=1 stride=2 pad=0 branch=1
batchnorm in=128 branch=1
conv2d out=128 k=3 stride=2 pad=1
batchnorm
relu
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
# stage 2 block 2
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
# stage 3 block 1
conv2d out=256 k=1 stride=2 pad=0 branch=1
batchnorm in=256 branch=1
conv2d out=256 k=3 stride=2 pad=1
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
# stage 3 block 2
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
# stage 4 block 1
conv2d out=512 k=1 stride=2 pad=0 branch=1
batchnorm in=512 branch=1
conv2d out=512 k=3 stride=2 pad=1
batchnorm
relu
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
# stage 4 block 2
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
avgpool
linear out=14
)SPEC";

inline constexpr std::string_view resnet50_spec = R"SPEC(# ResNet-50 with a 14-class head
input c=3 h=224 w=224
conv2d out=64 k=7 stride=2 pad=3
batchnorm
relu
maxpool k=3 stride=2 pad=1
# stage 1 block 1
conv2d out=256 k=1 stride=1 pad=0 branch=1
batchnorm in=256 branch=1
conv2d out=64 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
# stage 1 block 2
conv2d out=64 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
# stage 1 block 3
conv2d out=64 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
# stage 2 block 1
conv2d out=512 k=1 stride=2 pad=0 branch=1
batchnorm in=512 branch=1
conv2d out=128 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=128 k=3 stride=2 pad=1
batchnorm
relu
conv2d out=512 k=1 stride=1 pad=0
batchnorm
relu
# stage 2 block 2
conv2d out=128 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=512 k=1 stride=1 pad=0
batchnorm
relu
# stage 2 block 3
conv2d out=128 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=512 k=1 stride=1 pad=0
batchnorm
relu
# stage 2 block 4
conv2d out=128 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=512 k=1 stride=1 pad=0
batchnorm
relu
# stage 3 block 1
conv2d out=1024 k=1 stride=2 pad=0 branch=1
batchnorm in=1024 branch=1
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=256 k=3 stride=2 pad=1
batchnorm
relu
conv2d out=1024 k=1 stride=1 pad=0
batchnorm
relu
# stage 3 block 2
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=1024 k=1 stride=1 pad=0
batchnorm
relu
# stage 3 block 3
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=1024 k=1 stride=1 pad=0
batchnorm
relu
# stage 3 block 4
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=1024 k=1 stride=1 pad=0
batchnorm
relu
# stage 3 block 5
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=1024 k=1 stride=1 pad=0
batchnorm
relu
# stage 3 block 6
conv2d out=256 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=1024 k=1 stride=1 pad=0
batchnorm
relu
# stage 4 block 1
conv2d out=2048 k=1 stride=2 pad=0 branch=1
batchnorm in=2048 branch=1
conv2d out=512 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=512 k=3 stride=2 pad=1
batchnorm
relu
conv2d out=2048 k=1 stride=1 pad=0
batchnorm
relu
# stage 4 block 2
conv2d out=512 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=2048 k=1 stride=1 pad=0
batchnorm
relu
# stage 4 block 3
conv2d out=512 k=1 stride=1 pad=0
batchnorm
relu
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=2048 k=1 stride=1 pad=0
batchnorm
relu
avgpool
linear out=14
)SPEC";

inline constexpr std::string_view unet_small_spec = R"SPEC(# UNet (small variant): in=1, classes=1, transposed-conv upsampling
input c=1 h=256 w=256
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
maxpool k=2 stride=2
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
maxpool k=2 stride=2
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
maxpool k=2 stride=2
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
maxpool k=2 stride=2
conv2d out=1024 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=1024 k=3 stride=1 pad=1
batchnorm
relu
convtranspose2d out=512 k=2 stride=2
concat add=512
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=512 k=3 stride=1 pad=1
batchnorm
relu
convtranspose2d out=256 k=2 stride=2
concat add=256
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=256 k=3 stride=1 pad=1
batchnorm
relu
convtranspose2d out=128 k=2 stride=2
concat add=128
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=128 k=3 stride=1 pad=1
batchnorm
relu
convtranspose2d out=64 k=2 stride=2
concat add=64
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=64 k=3 stride=1 pad=1
batchnorm
relu
conv2d out=1 k=1 stride=1 pad=0 bias=1
)SPEC";

inline constexpr std::string_view sumnet_spec = R"SPEC(# SUMNet: VGG11 encoder, index unpooling decoder with skip concats
input c=1 h=256 w=256
conv2d out=64 k=3 stride=1 pad=1 bias=1
relu
maxpool k=2 stride=2
conv2d out=128 k=3 stride=1 pad=1 bias=1
relu
maxpool k=2 stride=2
conv2d out=256 k=3 stride=1 pad=1 bias=1
relu
conv2d out=256 k=3 stride=1 pad=1 bias=1
relu
maxpool k=2 stride=2
conv2d out=512 k=3 stride=1 pad=1 bias=1
relu
conv2d out=512 k=3 stride=1 pad=1 bias=1
relu
maxpool k=2 stride=2
conv2d out=512 k=3 stride=1 pad=1 bias=1
relu
conv2d out=512 k=3 stride=1 pad=1 bias=1
relu
maxpool k=2 stride=2
maxunpool scale=2
concat add=512
conv2d out=512 k=3 stride=1 pad=1 bias=1
relu
conv2d out=512 k=3 stride=1 pad=1 bias=1
relu
maxunpool scale=2
concat add=512
conv2d out=512 k=3 stride=1 pad=1 bias=1
relu
conv2d out=256 k=3 stride=1 pad=1 bias=1
relu
maxunpool scale=2
concat add=256
conv2d out=256 k=3 stride=1 pad=1 bias=1
relu
conv2d out=128 k=3 stride=1 pad=1 bias=1
relu
maxunpool scale=2
concat add=128
conv2d out=64 k=3 stride=1 pad=1 bias=1
relu
maxunpool scale=2
concat add=64
conv2d out=32 k=3 stride=1 pad=1 bias=1
relu
conv2d out=1 k=1 stride=1 pad=0 bias=1
)SPEC";

}  // namespace sadnn::baselines
