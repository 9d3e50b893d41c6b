public class TransferManagerConfiguration {
  /* Returns the minimum part size for upload parts. Decreasing the minimum part size
   causes multipart uploads to be split into a larger number of smaller parts. Setting
  this value too low has a negative effect on transfer speeds, causing extra latency
  and network communication for each part.
  @return The minimum part size for upload parts. */
  public long getMinimumUploadPartSize() {
    return minimumUploadPartSize;
  }
}
