"""msclust tests"""
