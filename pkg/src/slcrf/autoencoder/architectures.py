"""Ready-made autoencoder architectures.

The three reference-dataset layouts keep every listed kernel, channel and
FC width.  Where the listed strides/kernels cannot restore the input cube,
the smallest single change that does is applied (noted per function).
Kernels are given as ``(x, y, spectral)``.
"""

from .network import Architecture, conv, deconv, dense, pool


def indian_pines(patch=5, bands=200, batch_norm=True):
    """Indian Pines layout, ``K = 144``.

    Conv2's spectral stride is 19 (listed 20) so the encoder yields the
    listed 432 FC inputs; Deconv2's spectral kernel is 16 (listed 27) so
    the decoder returns 200 bands after Deconv1's stride of 22.
    """
    layers = [
        conv(24, (3, 3, 24), 1, batch_norm=batch_norm),
        conv(48, (3, 3, 24), (1, 1, 19), batch_norm=batch_norm),
        dense(216),
        dense(144),
        dense(216),
        dense(432),
        deconv(24, (3, 3, 9), (1, 1, 22), batch_norm=batch_norm),
        deconv(1, (3, 3, 16), 1, batch_norm=batch_norm),
    ]
    return Architecture((patch, patch, bands), layers, encoder_depth=4)


def paviau(patch=5, bands=103, batch_norm=True):
    """PaviaU layout, ``K = 216``.

    Deconv2's spectral kernel is 15 (listed 9) to get back to 103 bands.
    """
    layers = [
        conv(24, (3, 3, 11), 1, batch_norm=batch_norm),
        conv(48, (3, 3, 11), 1, batch_norm=batch_norm),
        pool((1, 1, 9), (1, 1, 9)),
        dense(216),
        dense(432),
        deconv(24, (3, 3, 9), (1, 1, 10), batch_norm=batch_norm),
        deconv(1, (3, 3, 15), 1, batch_norm=batch_norm),
    ]
    return Architecture((patch, patch, bands), layers, encoder_depth=4)


def houston(patch=5, bands=48, batch_norm=True):
    """Houston layout, ``K = 240``.

    The pooling stride is 4 (listed 9); with it the listed FC width of 480
    and both deconvolutions fit exactly.
    """
    layers = [
        conv(24, (3, 3, 5), 1, batch_norm=batch_norm),
        conv(48, (3, 3, 5), 1, batch_norm=batch_norm),
        pool((1, 1, 4), (1, 1, 4)),
        dense(240),
        dense(480),
        deconv(24, (3, 3, 4), (1, 1, 4), batch_norm=batch_norm),
        deconv(1, (3, 3, 9), 1, batch_norm=batch_norm),
    ]
    return Architecture((patch, patch, bands), layers, encoder_depth=4)


def tiny(bands=8, latent=4, channels=2, pooled=False, batch_norm=False, latent_activation="relu"):
    """Two convs and one FC per side on 5x5 patches; used for gradient checks."""
    if pooled:
        enc = [conv(channels, (3, 3, 3), batch_norm=batch_norm),
               conv(channels, (3, 3, 2), batch_norm=batch_norm),
               pool((1, 1, 2))]
        spectral = (bands - 3) // 2  # after conv1 (-2), conv2 (-1), pool /2
        dec_k = bands - 2 - 2 * (spectral - 1)
        dec = [deconv(channels, (3, 3, dec_k), (1, 1, 2), batch_norm=batch_norm),
               deconv(1, (3, 3, 3), activation="none")]
        flat = channels * spectral
    else:
        enc = [conv(channels, (3, 3, 3), batch_norm=batch_norm),
               conv(channels, (3, 3, 3), batch_norm=batch_norm)]
        dec = [deconv(channels, (3, 3, 3), batch_norm=batch_norm),
               deconv(1, (3, 3, 3), activation="none")]
        flat = channels * (bands - 4)
    layers = enc + [dense(latent, latent_activation), dense(flat)] + dec
    return Architecture((5, 5, bands), layers, encoder_depth=len(enc) + 1)


def desk(bands=12, latent=8, patch=5, channels=(8, 16), batch_norm=False,
         latent_activation="relu"):
    """Small layout for desk-scale synthetic runs on ``5x5xbands`` patches.

    Conv2 halves the spectral axis; the decoder mirrors it with a stride-2
    deconvolution whose kernel absorbs odd band counts.
    """
    if patch != 5:
        raise ValueError("desk layout is built for 5x5 patches")
    c1, c2 = channels
    s1 = bands - 2
    s2 = (s1 - 3) // 2 + 1
    dec_k = s1 - 2 * (s2 - 1)
    layers = [
        conv(c1, (3, 3, 3), batch_norm=batch_norm),
        conv(c2, (3, 3, 3), (1, 1, 2), batch_norm=batch_norm),
        dense(latent, latent_activation),
        dense(c2 * s2),
        deconv(c1, (3, 3, dec_k), (1, 1, 2), batch_norm=batch_norm),
        deconv(1, (3, 3, 3), activation="none"),
    ]
    return Architecture((patch, patch, bands), layers, encoder_depth=3)


BUILDERS = {"indian_pines": indian_pines, "paviau": paviau, "houston": houston}
